import sys

from surgscan.cli import main

sys.exit(main())
