# main.py
import logging
import sys
from typing import Optional, Sequence

import click

from app.cli.router import cli
from app.errors import SwarmDiffError

logger = logging.getLogger("swarmdiff")

# Exit codes: 0 success, 1 usage or config, 2 planning failure, 3 I/O or format
EXIT_USAGE = 1
EXIT_IO = 3


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line and map failures to exit codes.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        The process exit code
    """
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="swarmdiff", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except SwarmDiffError as exc:
        logger.debug("command failed", exc_info=True)
        click.echo(f"error: {exc.detail}", err=True)
        return exc.exit_code
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    return 0


# Run the command line if this file is executed directly
if __name__ == "__main__":
    sys.exit(main())
