import sys

from dql.cli import main

sys.exit(main())
