import sys

from astroimg.cli import main

sys.exit(main())
