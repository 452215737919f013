"""
Warp label maps, perturb images and evaluate segmentation bias
licence: https://opensource.org/licenses/MIT
"""

import sys
import logging
from pathlib import Path

import sisaug
from sisaug.config import resolve_config
from sisaug.scripting import (
    wrap_main, parse_subcommands, print_help, GLOBAL_ARG_PREFIX
)

script_name = Path(sys.argv[0]).name

operations = sisaug.operations

global_options = {
    'help': (bool, 'Print a help message and exit.'),
    'version': (bool, 'Show sisaug version and exit.'),
    'debug': (bool, 'Enable debugging output.'),
    'config': (Path, 'Read settings from a config file.'),
    'workers': (int, 'Number of worker processes (default: $SISAUG_WORKERS or 1).'),
    'seed': (int, 'Global random seed (default: 0).'),
}

usage = (
    f'usage: {script_name} '
    + ' '.join(f'[{GLOBAL_ARG_PREFIX}{_op}]' for _op in global_options)
    + ' COMMAND [ARG...] [OPTION...] [COMMAND ...]'
)


def help(command_args):
    """Print the usage help message."""
    print_help(command_args, usage, operations, global_options)

def version():
    """Print the version string."""
    print(f'sisaug v{sisaug.__version__}')


def main(argv=None):
    command_args, global_args = parse_subcommands(
        operations, global_options=global_options, argv=argv
    )
    debug = 'debug' in global_args.kwargs
    status = 0
    with wrap_main(debug):
        commands = [_args for _args in command_args if _args.command]
        if 'version' in global_args.kwargs:
            version()
        elif 'help' in global_args.kwargs or not commands:
            help(command_args)
        else:
            stray = [_args for _args in command_args if not _args.command and (_args.args or _args.kwargs)]
            if stray:
                raise ValueError(f'Unexpected arguments before command: {stray[0].args}')
            config = resolve_config(
                global_args.kwargs.get('config'),
                seed=global_args.kwargs.get('seed'),
                workers=global_args.kwargs.get('workers'),
            )
            for args in commands:
                logging.debug('Executing command `%s`', args.command)
                result = args.func(config, *args.args, **args.kwargs)
                if result.status:
                    logging.error(
                        '%s: %d file(s) failed.', args.command, len(result.errors)
                    )
                status = max(status, result.status)
    if status:
        sys.exit(status)


if __name__ == '__main__':
    main()
