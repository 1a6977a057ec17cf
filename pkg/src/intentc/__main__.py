import sys

from intentc.cli import main

sys.exit(main())
