import sys

from qcut.cli import main

sys.exit(main())
