import sys

from srma_rec.rec_numpy_impl.cli import main

if __name__ == "__main__":
    sys.exit(main())
