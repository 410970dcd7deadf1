"""Allow running aploco as `python -m aploco`."""

from aploco.cli import main

main()
