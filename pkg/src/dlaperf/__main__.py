import sys

from dlaperf.cli import main

sys.exit(main())
