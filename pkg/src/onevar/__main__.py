import sys

from onevar.cli import main

sys.exit(main())
