import sys

from tdwfpinn.cli import main

sys.exit(main())
