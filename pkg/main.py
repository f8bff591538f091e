import os
import sys

# Add project root directory to Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.cli import main as cli_main


def main():
    """Console entry point"""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
