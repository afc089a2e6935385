import sys

from qowf.cli import main

sys.exit(main())
