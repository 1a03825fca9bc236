#!/usr/bin/env python

import sys

from hnoma import cli


def main():
    return cli.command_input()


if __name__ == '__main__':
    sys.exit(main())
