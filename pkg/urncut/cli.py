import os
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from urncut.config import FORMATS, POLICIES, ConfigError, load_config
from urncut.core.couplings import (
    COUPLE_HEADER,
    COUPLE_MODES,
    FOUR_PHASE_HEADER,
    KappaSchedule,
    couple_sample,
    four_phase_sample,
)
from urncut.core.export import export_records, export_table, open_output, write_preamble
from urncut.core.kernel import ChainParams, build_kernel, write_kernel_csv
from urncut.core.mixing import CUTOFF_HEADER, PROFILE_HEADER, mixing_profile, mixing_time, window_diagnostic
from urncut.core.spectral import burn_in
from urncut.core.verification import mgf_constant_probe, run_exact_suite, run_stochastic_suite
from urncut.logging_utils import get_logger, set_log_level
from urncut.utils import coerce_number, parse_int_list

console = Console(stderr=True)
logger = get_logger("urncut.cli")

COMMANDS = ("kernel-dump", "mix", "cutoff-scan", "couple", "four-phase", "verify", "help")
SUITES = ("exact", "stochastic", "mgf", "all")
DUMP_N_MAX = 5000
EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

VALUE_FLAGS = {
    "--n": "n",
    "--k": "k",
    "--eps": "eps",
    "--x0": "x0",
    "--y0": "y0",
    "--mode": "mode",
    "--reps": "reps",
    "--t-max": "t_max",
    "--gamma1": "gamma1",
    "--seed": "seed",
    "--out": "out",
    "--format": "format",
    "--policy": "policy",
    "--jobs": "jobs",
}


def get_help_text():
    return """
urncut: Bernoulli-Laplace urn mixing laboratory

Commands:

  urncut kernel-dump --n N --k K [--out PATH]
      Banded transition kernel as `i,j,p` rows (n <= 5000)
  urncut mix --n N --k K [--eps E] [--policy extremes|all-states] [--t-max T]
      Exact d(t) profile and t_mix(eps)
  urncut cutoff-scan --n N1,N2,... --k K [--eps E]
      t_mix ladder against the (n/4k) ln n cutoff and the NW upper bound
  urncut couple --n N --k K --x0 X --y0 Y [--mode monotone|independent|decomposed]
                [--reps R] [--t-max T] [--seed S]
      Per-replica gap trajectories
  urncut four-phase --n N --k K [--x0 X] [--y0 Y] [--gamma1 G] [--reps R] [--seed S]
      Stopping times tau1..tau4 and the exact last-step TV
  urncut verify [exact|stochastic|mgf|all] [--seed S] [--reps R] [--out PATH]
      JSON check reports; exit status 1 if any check failed
  urncut help

Common flags: --out PATH  --format csv|json  --jobs J
Default output directory: URNCUT_OUT_DIR (otherwise stdout).
"""


def print_help():
    console.print(Panel(get_help_text(), title="[bold cyan]urncut Help[/bold cyan]", border_style="blue"))


@dataclass
class RunConfig:
    command: str
    n: Optional[int] = None
    k: Optional[int] = None
    ladder: List[int] = field(default_factory=list)
    eps: float = 0.25
    x0: Optional[int] = None
    y0: Optional[int] = None
    mode: str = "monotone"
    reps: int = 10000
    t_max: Optional[int] = None
    gamma1: float = 4.0
    seed: int = 0
    out: Optional[str] = None
    format: str = "csv"
    policy: str = "extremes"
    jobs: int = 1
    suite: str = "all"

    def params(self):
        return ChainParams(self.n, self.k)

    def metadata(self):
        """The config embedded in outputs: everything but destination and worker count."""
        meta = asdict(self)
        meta.pop("out")
        meta.pop("jobs")
        return meta

    def validate(self):
        """Raise ConfigError naming the first offending field."""
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError("format", f"must be one of {', '.join(FORMATS)}")
        if self.policy not in POLICIES:
            raise ConfigError("policy", f"must be one of {', '.join(POLICIES)}")
        if self.mode not in COUPLE_MODES:
            raise ConfigError("mode", f"must be one of {', '.join(COUPLE_MODES)}")
        if self.suite not in SUITES:
            raise ConfigError("suite", f"must be one of {', '.join(SUITES)}")
        _check_int("seed", self.seed, 0, 2**64 - 1)
        _check_int("reps", self.reps, 1)
        _check_int("jobs", self.jobs, 1)
        if self.t_max is not None:
            _check_int("t_max", self.t_max, 0)
        if not isinstance(self.eps, (int, float)) or not 0 < self.eps < 1:
            raise ConfigError("eps", f"must lie in (0, 1), got {self.eps!r}")
        if not isinstance(self.gamma1, (int, float)) or self.gamma1 <= 0:
            raise ConfigError("gamma1", f"must be positive, got {self.gamma1!r}")

        if self.command in ("kernel-dump", "mix", "couple", "four-phase"):
            self._check_params()
        if self.command == "kernel-dump" and self.n > DUMP_N_MAX:
            raise ConfigError("n", f"kernel-dump is limited to n <= {DUMP_N_MAX}, got {self.n}")
        if self.command == "mix" and not self.params().ergodic:
            raise ConfigError("k", f"chain with n={self.n} k={self.k} is not ergodic (need 0 < k < n)")
        if self.command == "cutoff-scan":
            if not self.ladder:
                raise ConfigError("n", "cutoff-scan needs a ladder such as --n 250,500,1000")
            _check_int("k", self.k, 1)
            for n in self.ladder:
                if not self.k < n:
                    raise ConfigError("n", f"ladder entry {n} must exceed k={self.k}")
        if self.command == "couple":
            for name in ("x0", "y0"):
                _check_int(name, getattr(self, name), 0, self.n)
        if self.command == "four-phase":
            if not (0 < self.k <= self.n / 2 and self.n >= 3):
                raise ConfigError("k", f"four-phase needs n >= 3 and 0 < k <= n/2, got n={self.n} k={self.k}")
            _check_int("x0", self.x0, 0, self.n)
            if self.y0 is not None:
                _check_int("y0", self.y0, 0, self.n)
        return self

    def _check_params(self):
        _check_int("n", self.n, 1)
        _check_int("k", self.k, 0, self.n)


def _check_int(name, value, lo, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if value < lo or (hi is not None and value > hi):
        span = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise ConfigError(name, f"must be {span}, got {value}")


def parse_args(args, config):
    """Build a RunConfig from argv, falling back to the loaded configuration."""
    if not args:
        return RunConfig("help")
    cmd, args = args[0], args[1:]
    values = {}
    positional = []
    skip_next = False
    for i, arg in enumerate(args):
        if skip_next:
            skip_next = False
            continue
        if arg in VALUE_FLAGS:
            if i + 1 >= len(args):
                raise ConfigError(VALUE_FLAGS[arg], f"{arg} needs a value")
            values[VALUE_FLAGS[arg]] = args[i + 1]
            skip_next = True
        elif arg.startswith("--"):
            raise ConfigError(arg.lstrip("-").replace("-", "_"), f"unknown flag {arg}")
        else:
            positional.append(arg)

    run = RunConfig(
        command=cmd,
        eps=config["eps"],
        reps=config["reps"],
        t_max=config["t_max"],
        gamma1=config["gamma1"],
        seed=config["seed"],
        format=config["format"],
        policy=config["policy"],
        jobs=config["jobs"] or 1,
        k=config["cutoff_k"] if cmd == "cutoff-scan" else None,
    )
    if cmd == "verify" and positional:
        run.suite = positional[0]
    if "n" in values:
        if cmd == "cutoff-scan":
            try:
                run.ladder = parse_int_list(values.pop("n"))
            except ValueError as e:
                raise ConfigError("n", str(e))
        else:
            run.n = coerce_number(values.pop("n"))
    if cmd == "cutoff-scan" and not run.ladder:
        run.ladder = list(config["cutoff_ladder"])
    for name, raw in values.items():
        if name in ("mode", "out", "format", "policy"):
            setattr(run, name, raw)
        elif name in ("eps", "gamma1"):
            value = coerce_number(raw)
            setattr(run, name, float(value) if isinstance(value, (int, float)) else value)
        else:
            setattr(run, name, coerce_number(raw))
    if cmd == "couple":
        run.x0 = run.n if run.x0 is None else run.x0
        run.y0 = 0 if run.y0 is None else run.y0
    if cmd == "four-phase" and run.x0 is None:
        run.x0 = 0
    return run.validate()


def output_path(run, config, stem, ext):
    if run.out:
        return run.out
    if config.get("out_dir"):
        os.makedirs(config["out_dir"], exist_ok=True)
        return os.path.join(config["out_dir"], f"{stem}.{ext}")
    return None


def _stem(run):
    return f"{run.command}-n{run.n}-k{run.k}"


def _announce(path):
    if path:
        console.print(f"[green]wrote[/green] {path}")


def cmd_kernel_dump(run, config):
    kernel = build_kernel(run.params())
    path = output_path(run, config, _stem(run), run.format)
    if run.format == "csv":
        with open_output(path) as fh:
            write_preamble(fh, run.metadata())
            write_kernel_csv(kernel, fh)
    else:
        rows = [(i, j, float(kernel.band[i, j - i + run.k]))
                for i in range(run.n + 1)
                for j in range(max(0, i - run.k), min(run.n, i + run.k) + 1)]
        export_table(path, "json", ["i", "j", "p"], rows, run.metadata())
    console.print(f"kernel n={run.n} k={run.k} max_row_dev={kernel.max_row_deviation:.3g} "
                  f"balance_err={kernel.balance_error:.3g}")
    _announce(path)
    return EXIT_OK


def cmd_mix(run, config):
    kernel = build_kernel(run.params())
    t_mix = mixing_time(kernel, run.eps, run.policy)
    t_max = run.t_max if run.t_max is not None else 2 * t_mix
    profile = mixing_profile(kernel, t_max, run.policy)
    rows = [(run.n, run.k, int(t), float(d)) for t, d in zip(profile.times, profile.distances)]
    path = output_path(run, config, _stem(run), run.format)
    export_table(path, run.format, PROFILE_HEADER, rows, run.metadata())
    console.print(f"t_mix({run.eps}) = {t_mix}  (n={run.n} k={run.k} policy={run.policy})")
    _announce(path)
    return EXIT_OK


def cmd_cutoff_scan(run, config):
    ladder = [ChainParams(n, run.k) for n in run.ladder]
    records = window_diagnostic(ladder, run.eps, run.policy, run.jobs)
    path = output_path(run, config, f"cutoff-scan-k{run.k}", run.format)
    export_table(path, run.format, CUTOFF_HEADER, [r.row() for r in records], run.metadata())

    table = Table(title=f"cutoff scan k={run.k} eps={run.eps}")
    for column in ("n", "t_mix", "t_star", "ratio", "nw_upper", "remark_upper", "nw_lower_shape"):
        table.add_column(column, justify="right")
    for r in records:
        table.add_row(str(r.n), str(r.t_mix), str(r.t_star), f"{r.ratio:.4f}", str(r.nw_upper),
                      str(r.remark_upper), f"{r.nw_lower_shape:.1f}")
    console.print(table)
    _announce(path)
    return EXIT_OK if all(r.nw_ok for r in records) else EXIT_FAILED


def cmd_couple(run, config):
    params = run.params()
    t_max = run.t_max if run.t_max is not None else 2 * burn_in(params) if params.k else 0
    gaps = couple_sample(params, run.x0, run.y0, t_max, run.mode, run.reps, run.seed, run.jobs)
    rows = ((run.seed, i, t, int(gaps[i, t])) for i in range(run.reps) for t in range(t_max + 1))
    path = output_path(run, config, _stem(run), run.format)
    export_table(path, run.format, COUPLE_HEADER, rows, run.metadata())
    met = int((gaps[:, -1] == 0).sum())
    console.print(f"couple mode={run.mode} reps={run.reps} t_max={t_max}: {met} of {run.reps} pairs at gap 0")
    _announce(path)
    return EXIT_OK


def cmd_four_phase(run, config):
    params = run.params()
    kappa = KappaSchedule.from_gamma(run.gamma1, config["kappa_scale"])
    records = four_phase_sample(params, run.x0, run.gamma1, run.reps, run.seed, kappa, run.jobs, y0=run.y0)
    rows = [r.row(run.seed, i) for i, r in enumerate(records)]
    path = output_path(run, config, _stem(run), run.format)
    export_table(path, run.format, FOUR_PHASE_HEADER, rows, run.metadata())

    table = Table(title=f"four-phase n={run.n} k={run.k} gamma1={run.gamma1}")
    table.add_column("outcome")
    table.add_column("runs", justify="right")
    finished = sum(r.censored_phase is None for r in records)
    table.add_row("uncensored", f"{finished} ({finished / len(records):.3f})")
    for phase in ("A", "B", "C"):
        table.add_row(f"censored in {phase}", str(sum(r.censored_phase == phase for r in records)))
    console.print(table)
    _announce(path)
    return EXIT_OK


def cmd_verify(run, config, explicit):
    reports = []
    if run.suite in ("exact", "all"):
        n_max = run.n if "n" in explicit and "k" not in explicit else config["exact_n_max"]
        reports += run_exact_suite(
            n_max=n_max,
            tolerance=config["exact_tolerance"],
            tv_grid_max=config["tv_grid_max"],
            shifted_k_max=config["shifted_k_max"],
            policy_n_max=config["policy_n_max"],
            spectral_n_max=config["spectral_n_max"],
            moment_n_max=config["moment_n_max"],
            cutoff_ladder=config["cutoff_ladder"],
            cutoff_k=config["cutoff_k"],
            last_step_params=config["last_step_params"],
            eps=run.eps,
            jobs=run.jobs,
        )
    if run.suite in ("stochastic", "all"):
        grid = [(run.n, run.k)] if run.n is not None and run.k is not None else config["stochastic_grid"]
        reports += run_stochastic_suite(grid, run.reps, run.seed, run.jobs)
    if run.suite in ("mgf", "all"):
        reports += mgf_constant_probe(config["mgf_grid"], config["mgf_h"])

    path = output_path(run, config, f"verify-{run.suite}", "json")
    export_records(path, [r.to_dict() for r in reports], run.metadata())

    table = Table(title=f"verify {run.suite}")
    for column in ("check", "n", "k", "statistic", "bound", "passed"):
        table.add_column(column, justify="right" if column not in ("check", "passed") else "left")
    for r in reports:
        mark = "[green]ok[/green]" if r.passed and r.direction != "info" else (
            "[blue]info[/blue]" if r.direction == "info" else "[red]FAIL[/red]")
        table.add_row(r.name, str(r.n), str(r.k), f"{r.statistic:.6g}", f"{r.bound:.6g}", mark)
    console.print(table)
    failed = [r.name for r in reports if not r.passed]
    logger.info("verify suite=%s checks=%s failed=%s", run.suite, len(reports), len(failed))
    _announce(path)
    return EXIT_FAILED if failed else EXIT_OK


def main():
    try:
        config = load_config()
        set_log_level(config["log_level"])
        args = sys.argv[1:]
        run = parse_args(args, config)
        explicit = {VALUE_FLAGS[a] for a in args if a in VALUE_FLAGS}
        logger.info("command=%s n=%s k=%s seed=%s", run.command, run.n, run.k, run.seed)

        if run.command == "help":
            print_help()
            code = EXIT_OK
        elif run.command == "kernel-dump":
            code = cmd_kernel_dump(run, config)
        elif run.command == "mix":
            code = cmd_mix(run, config)
        elif run.command == "cutoff-scan":
            code = cmd_cutoff_scan(run, config)
        elif run.command == "couple":
            code = cmd_couple(run, config)
        elif run.command == "four-phase":
            code = cmd_four_phase(run, config)
        else:
            code = cmd_verify(run, config, explicit)
    except ConfigError as e:
        logger.warning("config_error field=%s message=%s", e.field, e)
        console.print(f"[red]Config error[/red] {e}")
        sys.exit(EXIT_CONFIG)
    except ValueError as e:
        logger.warning("validation_error=%s", e)
        console.print(f"[red]Validation error[/red] {e}")
        sys.exit(EXIT_CONFIG)
    except Exception as e:
        logger.exception("unexpected_error")
        console.print(f"[red]Unexpected error[/red] {e}")
        sys.exit(EXIT_FAILED)
    sys.exit(code)


if __name__ == "__main__":
    main()
