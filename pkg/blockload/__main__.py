#
# __main__.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""Allows running the command line with python -m blockload"""

from blockload import main

if __name__ == "__main__":
    main()
