import sys

from ltvstab.cli import main

sys.exit(main())
