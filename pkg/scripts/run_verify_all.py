#!/usr/bin/env python3
"""Run every verification suite at the default configuration.

Equivalent to `memwave verify-all`; kept as a script entry for notebook-free
experiment runs.  Pass-through of CLI flags is supported.
"""

import sys

from memwave.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify-all", *sys.argv[1:]]))
