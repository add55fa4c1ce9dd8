import sys

from bellphase.cli import run


def main() -> None:
    sys.exit(run())
