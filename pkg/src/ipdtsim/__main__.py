import sys

from ipdtsim.cli import main


sys.exit(main())
