import sys

from mbinv.main import main

sys.exit(main())
