import sys

from matra.cli import main

sys.exit(main())
