from fracsg.cli import main
import sys

sys.exit(main())
