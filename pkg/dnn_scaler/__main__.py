import sys

from dnn_scaler.cli import main

sys.exit(main())
