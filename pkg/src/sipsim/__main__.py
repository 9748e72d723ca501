import sys

from sipsim.cli import main

sys.exit(main())
