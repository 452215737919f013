#!/usr/bin/env python3
from sisaug.scripts.toolkit import main
main()
