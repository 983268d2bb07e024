#!/usr/bin/env python
"""decodelab command line.

Usage:

  python -m decodelab <subcommand> [options]
"""

from decodelab import launch_new_instance

launch_new_instance()
