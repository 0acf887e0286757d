import sys

from floweval.cli import main

sys.exit(main())
