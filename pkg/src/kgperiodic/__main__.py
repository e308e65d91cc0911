"""Allow `python -m kgperiodic <subcommand> <config>`."""

import sys

from .cli import main

sys.exit(main())
