import sys

from lmip.cli import main

sys.exit(main())
