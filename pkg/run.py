import sys

from omqm.ObservationLab import main


if __name__ == '__main__':
    sys.exit(main())
