import sys

from posedistill.cli.main import main

sys.exit(main())
