import sys

from wastefinder.cli import main

sys.exit(main())
