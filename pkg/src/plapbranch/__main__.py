import sys

from plapbranch.cli import main

sys.exit(main())
