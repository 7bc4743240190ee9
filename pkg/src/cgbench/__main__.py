import sys

from cgbench.cli import main

sys.exit(main())
