from django.core.management.base import BaseCommand, CommandError
import logging
from pathlib import Path
from dataclasses import replace
from django.conf import settings

from beamforming.config import MODES, ExperimentConfig, dump_config, load_config
from beamforming.exceptions import ConfigError, SimulationError
from beamforming.experiment import archive_rows, run_sweep, write_csv, write_trace_csv

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


class Command(BaseCommand):
    help = "Run a Monte-Carlo sum-rate sweep of the distributed multi-RIS beamforming algorithm"

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            default=getattr(settings, 'SIM_DEFAULT_CONFIG', ''),
            help='TOML experiment config (default: SIM_DEFAULT_CONFIG, or built-in defaults)'
        )
        parser.add_argument('--mode', choices=MODES, help='Algorithm or baseline to run')
        parser.add_argument('--seed', type=int, help='Master seed (unsigned 64-bit)')
        parser.add_argument(
            '--pmax-dbm',
            type=float,
            nargs='+',
            help='Per-BS power budgets to sweep, in dBm'
        )
        parser.add_argument('--realizations', type=int, help='Channel realizations per power budget')
        parser.add_argument('--out', type=str, help='Result CSV path (relative paths go under SIM_OUTPUT_DIR)')
        parser.add_argument('--trace', type=str, help='Per-iteration trace CSV of the first sweep cell')
        parser.add_argument(
            '--workers',
            type=int,
            help='Worker threads for sweep cells (default: SIM_WORKERS)'
        )
        parser.add_argument(
            '--store',
            action='store_true',
            default=getattr(settings, 'SIM_STORE_RESULTS', False),
            help='Archive the run and its rows in the database'
        )
        parser.add_argument('--dump-config', action='store_true', help='Print the effective config as TOML and exit')
        parser.add_argument('--quiet', action='store_true', help='No progress output')

    def handle(self, *args, **options):
        quiet = options['quiet']
        try:
            config = self.build_config(options)
            if options['dump_config']:
                self.stdout.write(dump_config(config))
                return
            if not options['out'] and not config.experiment.output:
                raise ConfigError("an output path is required (--out)", key="experiment.output")
            self.run_experiment(config, options, quiet)
        except ConfigError as e:
            logger.error(f"Configuration error: {e}")
            raise CommandError(f"Configuration error: {e}", returncode=EXIT_CONFIG_ERROR)
        except SimulationError as e:
            logger.error(f"Simulation failed: {e}")
            raise CommandError(f"Simulation failed: {e}", returncode=EXIT_RUNTIME_ERROR)
        except OSError as e:
            logger.error(f"Could not write results: {e}")
            raise CommandError(f"Could not write results: {e}", returncode=EXIT_RUNTIME_ERROR)

    def build_config(self, options) -> ExperimentConfig:
        """Config file (or defaults) with command-line overrides applied."""
        path = options['config']
        config = load_config(path) if path else ExperimentConfig()

        overrides = {}
        if options['mode']:
            overrides['mode'] = options['mode']
        if options['seed'] is not None:
            overrides['master_seed'] = options['seed']
        if options['pmax_dbm']:
            overrides['sweep'] = tuple(float(p) for p in options['pmax_dbm'])
        if options['realizations'] is not None:
            overrides['realizations'] = options['realizations']
        if options['out']:
            overrides['output'] = options['out']
        workers = options['workers']
        if workers is None and config.experiment.workers == 1:
            workers = getattr(settings, 'SIM_WORKERS', 1)
        if workers is not None:
            overrides['workers'] = workers

        config = replace(config, experiment=replace(config.experiment, **overrides))
        return config.validate()

    def resolve(self, path: str) -> Path:
        path = Path(path)
        if path.is_absolute():
            return path
        return Path(getattr(settings, 'SIM_OUTPUT_DIR', 'results')) / path

    def run_experiment(self, config: ExperimentConfig, options, quiet: bool):
        settings_ = config.experiment
        if not quiet:
            self.stdout.write(
                self.style.SUCCESS(
                    f"🚀 Running '{settings_.mode}' sweep: P_max {list(settings_.sweep)} dBm, "
                    f"{settings_.realizations} realizations, seed {settings_.master_seed}"
                )
            )

        rows = run_sweep(config, progress=not quiet)

        csv_path = write_csv(rows, self.resolve(settings_.output))
        if not quiet:
            self.stdout.write(f"💾 Wrote {len(rows)} rows to {csv_path}")

        if options['trace']:
            trace_path = write_trace_csv(rows[0].trace, self.resolve(options['trace']))
            if not quiet:
                self.stdout.write(f"📈 Wrote trace of {len(rows[0].trace)} iterations to {trace_path}")

        violations = sum(row.trace.ascent_violations for row in rows if row.trace is not None)
        if violations and not quiet:
            self.stdout.write(self.style.WARNING(f"⚠️  {violations} surrogate-ascent violations logged"))

        if options['store']:
            record = archive_rows(rows, config, csv_path)
            if not quiet:
                self.stdout.write(f"🗄️  Archived as run #{record.pk}")

        if not quiet:
            best = max(rows, key=lambda row: row.final_sum_rate)
            self.stdout.write(
                self.style.SUCCESS(
                    f"🎉 Done: {len(rows)} runs, best sum rate {best.final_sum_rate:.4f} bit/s/Hz "
                    f"at {best.p_max_dbm:g} dBm"
                )
            )
