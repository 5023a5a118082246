import sys

from twopoint.cli import main

sys.exit(main())
