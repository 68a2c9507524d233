import sys

from dqsim.cli import main

sys.exit(main())
