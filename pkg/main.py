#!/usr/bin/env python3
"""
Main entry point for Heatwave
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

# Check for required dependencies before importing project modules
try:
    import yaml
except ImportError as e:
    print("\n" + "=" * 70)
    print("ERROR: Required dependency 'pyyaml' is not installed!")
    print("=" * 70)
    print("\nTo fix this issue, please install the required dependencies:")
    print("\n  pip install -r requirements.txt")
    print("\nNote: The package is called 'pyyaml' but imports as 'yaml':")
    print("\n  pip install pyyaml")
    print("=" * 70 + "\n")
    sys.exit(1)

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.config import config
from src.harness.cli import cli


def setup_logging():
    """Configure the root logger from config.yaml"""
    log_file = Path(config.get('logging.file', 'data/logs/heatwave.log'))
    log_file.parent.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        level=getattr(logging, config.get('logging.level', 'INFO'), logging.INFO),
        format=config.get('logging.format', '%(asctime)s - %(name)s - %(levelname)s - %(message)s'),
        handlers=[
            RotatingFileHandler(
                log_file,
                maxBytes=int(config.get('logging.max_bytes', 10485760)),
                backupCount=int(config.get('logging.backup_count', 5))
            ),
            logging.StreamHandler()
        ]
    )


def main():
    """Main entry point"""
    setup_logging()
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
