import sys

from gwlaw.cli import main

sys.exit(main())
