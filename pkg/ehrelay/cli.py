"""
Command line for ehrelay sweeps.

    ehrelay run [CONFIG] [--preset NAME] [flags]   sweep, CSV to --out or stdout
    ehrelay show RUN_UID                           stored rows as CSV
    ehrelay runs                                   most recent stored runs
    ehrelay presets                                list the presets

Flags mirror config keys and override them. Errors exit with the status carried by
the exception (2 invalid input, 3 auction non-convergence, 4 quadrature failure).
"""
import functools
import io
import sys
import traceback

from pathlib import Path

import click

from .errors import ConfigError, ConvergenceError, RelayError
from .logs import attach_stderr_handler, debug, log_debug
from .sweep import PRESETS, Panel, dump_config, parse_config, parse_text, preset_panels, run_sweep, write_csv


# flags that map straight onto config keys
FLAG_KEYS = {
    'snr': 'snr',
    'strategy': 'strategies',
    'metric': 'metrics',
    'trials': 'trials',
    'seed': 'seed',
    'rate': 'rate',
    'eta': 'eta',
    'pairs': 'pairs',
    'mode': 'mode',
    'workers': 'workers',
}
PRESET_FLAGS = ('trials', 'seed', 'workers')


def handle_errors(command):
    """ package errors exit with their own status, anything else with 1 """
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except RelayError as e:
            click.echo(f'error: {e}', err=True)
            sys.exit(e.exit_code)
        except click.ClickException:
            raise
        except Exception as e:
            if debug:
                traceback.print_exc()
            click.echo(f'error: {e}' if debug else 'error: something went wrong', err=True)
            sys.exit(1)
    return wrapper


@click.group()
def cli():
    """ outage analysis and power allocation for an energy-harvesting relay """
    attach_stderr_handler()


@cli.command()
@click.argument('config', required=False, type=click.Path(dir_okay=False, path_type=Path))
@click.option('--preset', help='named figure setup, see `ehrelay presets`')
@click.option('--snr', help='start:stop:step in dB')
@click.option('--strategy', help='comma list of strategies')
@click.option('--metric', help='comma list of metrics')
@click.option('--trials', type=int)
@click.option('--seed', type=int)
@click.option('--rate', type=float, help='target rate R in bits per channel use')
@click.option('--eta', type=float, help='harvesting efficiency')
@click.option('--pairs', type=int, help='number of source-destination pairs M')
@click.option('--mode', help='mc, exact, asymptotic, bounds, a comma list, or all')
@click.option('--workers', type=int, help='processes for the Monte Carlo engine')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), help='CSV file, default stdout')
@click.option('--store', is_flag=True, help='also keep the rows in the result store')
@click.option('--label', help='label for the stored run')
@handle_errors
def run(config, preset, out, store, label, **flags):
    """ run a sweep and write CSV rows """
    panels = _panels(config, preset, flags)
    failures = 0
    for index, panel in enumerate(panels):
        log_debug(f'running panel {panel.name}')
        result = run_sweep(panel.spec, panel.config)
        failures += result.auction_failures
        _emit(result.rows, panel, out, index, len(panels))
        if store:
            _store(result.rows, panel, label or preset or (config and str(config)))

    if failures:
        raise ConvergenceError(f'{failures} auctions did not converge; rows were written anyway',
                               failures)


def _panels(config, preset, flags):
    if preset is not None:
        if config is not None:
            raise ConfigError('give either a config file or --preset, not both')
        extra = [name for name, value in flags.items() if value is not None and name not in PRESET_FLAGS]
        if extra:
            raise ConfigError(f'--{extra[0]} cannot be combined with --preset '
                              f'(only {", ".join("--" + f for f in PRESET_FLAGS)})')
        return preset_panels(preset, **{name: flags[name] for name in PRESET_FLAGS})

    overrides = {FLAG_KEYS[name]: value for name, value in flags.items() if value is not None}
    if config is not None:
        system, spec = parse_config(config, overrides)
    else:
        system, spec = parse_text('', overrides)
    return [Panel(name=config.stem if config is not None else 'sweep', config=system, spec=spec)]


def _emit(rows, panel, out, index, count):
    if out is None:
        if count > 1:
            click.echo(f'# {panel.name}')
        _echo_csv(rows)
        return
    if count > 1:
        out = out.with_name(f'{out.stem}-{panel.name}{out.suffix}')
    with open(out, 'w', newline='') as handle:
        write_csv(rows, handle)
    click.echo(f'wrote {len(rows)} rows to {out}', err=True)


def _echo_csv(rows):
    buffer = io.StringIO()
    write_csv(rows, buffer)
    click.echo(buffer.getvalue(), nl=False)


def _store(rows, panel, label):
    from data_model import get_database

    db_session = get_database()
    run_uid = db_session.insert_run(dump_config(panel.config, panel.spec), label=label)
    count = db_session.insert_rows(run_uid, rows)
    click.echo(f'stored {count} rows as run {run_uid}', err=True)


@cli.command()
@click.argument('run_uid')
@click.option('--config', 'show_config', is_flag=True, help='print the run configuration instead')
@handle_errors
def show(run_uid, show_config):
    """ print a stored run as CSV """
    from data_model import get_database

    db_session = get_database()
    config = db_session.retrieve_run(run_uid)
    if config is None:
        raise RelayError(f'no such run {run_uid}')
    if show_config:
        click.echo(config, nl=False)
        return
    _echo_csv(db_session.retrieve_rows(run_uid))


@cli.command()
@click.option('--limit', type=int, default=3, show_default=True)
@handle_errors
def runs(limit):
    """ list the most recent stored runs """
    from data_model import get_database

    for uid, label, timestamp in get_database().most_recent_runs(limit):
        click.echo(f'{uid}\t{timestamp:.0f}\t{label or ""}')


@cli.command()
def presets():
    """ list the figure presets """
    for name in PRESETS:
        click.echo(name)


def main():
    cli(prog_name='ehrelay')


if __name__ == '__main__':
    main()
