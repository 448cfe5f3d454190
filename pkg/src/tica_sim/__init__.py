"""
TICA simulator
A trace-driven simulator of a three-level DRAM / RO-SSD / WO-SSD hybrid I/O cache.
"""

__version__ = "0.1.0"
__all__ = ["__version__", "main"]

def main():
    """Main entry point for the package."""
    # Import the CLI only when explicitly needed
    import sys
    from .cli import main as cli_main
    sys.exit(cli_main())
