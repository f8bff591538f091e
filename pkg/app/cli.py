"""
mcinv command-line interface
Generate test matrices, precheck convergence, run CC / GS / SE inversions and
compare the resulting reports.
"""

import argparse
import json
import os
import sys
from typing import Any, Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

from app import __version__
from app.core.config import Settings, get_settings, reload_settings
from app.core.exceptions import EXIT_CODES, ConfigError, InversionError
from app.models.experiment import ExperimentConfig
from app.models.generators import AtildeRule, GammaConvention, LatticeSpec, MixedModelSpec
from app.models.report import Method, RunReport
from app.models.sampling import BurnInConfig, InnerSolver, NoiseFamily
from app.services.diagnostics import render_report_table
from app.services.experiment_runner import compare, run_experiment
from app.services.generators import build_dirac_matrix, build_mixed_model_matrix, simulate_pedigree
from app.services.iter_solvers import precheck
from app.services.sparse_matrix import read_matrix_market, write_matrix_market
from app.utils.helpers import format_scalar, load_entry_file

EXIT_OK = 0
EXIT_NOT_CONVERGED = 4


def setup_logging(verbose: bool = False, settings: Optional[Settings] = None):
    """Setup logging configuration"""
    logger.remove()  # Remove default handler

    if verbose:
        logger.add(sys.stderr, level="DEBUG", format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>")
    else:
        logger.add(sys.stderr, level="INFO", format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>")

    if settings is not None and settings.logging.file:
        os.makedirs(os.path.dirname(os.path.abspath(settings.logging.file)), exist_ok=True)
        logger.add(
            settings.logging.file,
            level=settings.logging.level,
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
            rotation=settings.logging.max_size,
            retention=settings.logging.backup_count,
            encoding="utf-8",
        )


# ----------------------------------------------------------------- generate


def generate_command(args, settings: Settings) -> int:
    """Handle generate command"""
    if args.family == "wu-schaeffer":
        fraction = args.unknown_fraction
        if fraction is None:
            fraction = settings.generators.unknown_parent_fraction
        pedigree = simulate_pedigree(args.animals, args.herds, args.generations, args.seed, fraction)
        spec = MixedModelSpec(ratio=args.ratio, lam=args.lam, rule=args.rule or settings.generators.atilde_rule)
        matrix = build_mixed_model_matrix(pedigree, spec)
        comment = (f"Wu-Schaeffer mixed model: animals={args.animals} herds={args.herds} "
                   f"generations={args.generations} lambda={args.lam} ratio={args.ratio} rule={spec.rule.value} "
                   f"seed={args.seed}")
    else:
        spec = LatticeSpec(n0=args.n0, n1=args.n1, n2=args.n2, n3=args.n3, k=args.k,
                           gamma_convention=args.gamma or settings.generators.gamma_convention)
        matrix = build_dirac_matrix(spec)
        comment = f"Wilson-Dirac {spec.describe()}, periodic boundaries"

    write_matrix_market(matrix, args.out, comment=comment)
    print(f"✅ {comment}")
    print(f"   order {matrix.order}, nnz {matrix.nnz} -> {args.out}")
    return EXIT_OK


# ----------------------------------------------------------------- precheck


def precheck_command(args, settings: Settings) -> int:
    """Handle precheck command; exits 3 when CC is predicted to diverge"""
    matrix = read_matrix_market(args.matrix)
    result = precheck(
        matrix,
        max_iter=settings.solvers.power_iterations,
        tol=settings.solvers.power_tolerance,
        seed=settings.solvers.power_seed,
    )
    if args.json:
        print(json.dumps({"matrix": args.matrix, "order": matrix.order, **result.to_dict()}, indent=2))
    else:
        icon = "✅" if result.passes else "❌"
        print(f"{icon} {args.matrix}: order {matrix.order}, nnz {matrix.nnz}")
        print(f"   sp(T) ~ {result.spectral_radius_t.value:.6g}"
              f"{'' if result.spectral_radius_t.converged else ' (not converged)'}")
        print(f"   sp(S) ~ {result.spectral_radius_s.value:.6g}"
              f"{'' if result.spectral_radius_s.converged else ' (not converged)'}")
    return EXIT_OK if result.passes else 3


# ------------------------------------------------------------------ invert


def _experiment_overrides(args, settings: Settings, method: Method) -> Dict[str, Any]:
    burn_in = BurnInConfig.from_settings(settings).model_dump()
    if args.burnin_tol is not None:
        burn_in["tolerance"] = args.burnin_tol

    overrides: Dict[str, Any] = {
        "matrix_path": args.matrix,
        "method": method,
        "query": args.q,
        "entries": load_entry_file(args.entries) if args.entries else None,
        "noise_family": args.noise,
        "seed": args.seed,
        "burn_in": burn_in,
        "rel_tolerance": args.tol,
        "max_cycles": args.max_cycles,
        "replicates": args.replicates,
        "jobs": args.jobs,
        "force": args.force,
        "with_exact": args.exact,
        "report_path": args.report,
        "dump_series_path": args.dump_series,
        "baseline_report_path": args.baseline_report,
    }
    if method is Method.SE:
        overrides["se"] = {
            "inner_solver": args.inner or settings.se.inner_solver,
            "inner_tolerance": args.inner_tol or settings.se.inner_tolerance,
            "inner_max_iter": args.inner_max_iter or settings.se.inner_max_iter,
        }
    return overrides


def _print_report(report: RunReport) -> None:
    print(render_report_table([report], [report.method.value.upper()]))
    for element in report.element_results:
        line = f"C^-1[{element.row},{element.col}] = {format_scalar(element.estimate, 10)} ± {element.mc_std_error:.3g}"
        if element.exact is not None:
            line += f"  (exact {format_scalar(element.exact, 10)})"
        print(line)
    if report.exact is not None and report.method is not Method.ORACLE:
        print(f"\n|estimate - exact| / MC error = {report.z_score_vs_exact:.3f}")


def invert_command(args, settings: Settings, method: Method) -> int:
    """Handle invert-cc / invert-gs / invert-se commands"""
    config = ExperimentConfig.from_settings(settings, **_experiment_overrides(args, settings, method))
    report = run_experiment(config, settings)
    _print_report(report)
    if not report.converged:
        print(f"⚠️  Cycle cap reached before the target error ({report.mc_std_error:.3g})")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def oracle_command(args, settings: Settings) -> int:
    """Handle oracle command"""
    config = ExperimentConfig.parse({
        "matrix_path": args.matrix,
        "method": Method.ORACLE,
        "query": args.q,
        "report_path": args.report,
    })
    report = run_experiment(config, settings)
    print(f"tr(Q C^-1) = {format_scalar(report.estimate, 15)}")
    return EXIT_OK


# ------------------------------------------------------------------ reports


def compare_command(args, settings: Settings) -> int:
    """Handle compare command"""
    table = compare(RunReport.load(args.a), RunReport.load(args.b),
                    titles=(os.path.basename(args.a), os.path.basename(args.b)))
    print(table.render())
    return EXIT_OK


def report_command(args, settings: Settings) -> int:
    """Handle report command"""
    reports = [RunReport.load(path) for path in args.reports]
    print(render_report_table(reports, [os.path.basename(p) for p in args.reports]))
    return EXIT_OK


# -------------------------------------------------------------------- parser


def _add_invert_arguments(parser: argparse.ArgumentParser, se: bool = False) -> None:
    parser.add_argument("--matrix", required=True, help="Matrix Market file of C")
    parser.add_argument("--q", default="identity", help="Q: identity, diag:<index file> or mm:<file> (default: identity)")
    parser.add_argument("--entries", help="Estimate these entries of C^-1 instead of a trace: one 'i j' pair per line")
    parser.add_argument("--tol", type=float, help="Relative MC error target (default: 5e-5 real, 1e-5 complex)")
    parser.add_argument("--burnin-tol", type=float, help="Burn-in coupling tolerance (default: from config)")
    parser.add_argument("--max-cycles", type=int, help="Hard cap on cycles (systems for SE), burn-in included")
    parser.add_argument("--seed", type=int, help="Noise seed (default: from config)")
    parser.add_argument("--noise", choices=[f.value for f in NoiseFamily], help="Noise family (default: z2)")
    parser.add_argument("--replicates", type=int, help="Independent replicates with seeds seed, seed+1, ...")
    parser.add_argument("--jobs", type=int, help="Replicates run concurrently")
    parser.add_argument("-f", "--force", action="store_true", help="Run even if the spectral-radius precheck fails")
    parser.add_argument("--exact", action="store_true", help="Add the dense LU value when the order allows")
    parser.add_argument("--report", help="Write the JSON run report here")
    parser.add_argument("--dump-series", help="Write the per-cycle samples of the first replicate as CSV")
    parser.add_argument("--baseline-report", help="Normalize timings to this report's time per cycle")
    if se:
        parser.add_argument("--inner", choices=[s.value for s in InnerSolver], help="Inner solver (default: bicg)")
        parser.add_argument("--inner-tol", type=float, help="Inner solver tolerance (default: 5e-5)")
        parser.add_argument("--inner-max-iter", type=int, help="Inner solver iteration cap")


def build_parser() -> argparse.ArgumentParser:
    exit_codes = "\n".join(f"  {code:<4} {meaning}" for code, meaning in EXIT_CODES.items())
    parser = argparse.ArgumentParser(
        prog="mcinv",
        description="Correlated Chains Monte Carlo inversion of sparse matrices",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Examples:
  # Generate a Wu-Schaeffer matrix and a 4^4 Wilson-Dirac matrix
  mcinv generate wu-schaeffer --animals 200 --herds 20 --out ws.mtx
  mcinv generate dirac --n0 4 --n1 4 --n2 4 --n3 4 --k 0.1 --out dirac4.mtx

  # Check sp(T) and sp(S), then estimate tr(C^-1) with CC and SE
  mcinv precheck --matrix ws.mtx
  mcinv invert-cc --matrix ws.mtx --report cc.json
  mcinv invert-se --matrix ws.mtx --report se.json --baseline-report cc.json

  # Compare two runs
  mcinv compare cc.json se.json

Exit codes:
{exit_codes}
        """,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable verbose logging")
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--version", action="version", version=f"mcinv {__version__}")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Generate command
    generate_parser = subparsers.add_parser("generate", help="Generate a test matrix as Matrix Market")
    families = generate_parser.add_subparsers(dest="family", required=True)

    ws_parser = families.add_parser("wu-schaeffer", help="Mixed-model matrix from a simulated pedigree")
    ws_parser.add_argument("--animals", type=int, required=True, help="Number of animals")
    ws_parser.add_argument("--herds", type=int, required=True, help="Number of herds")
    ws_parser.add_argument("--generations", type=int, default=4, help="Discrete generations (default: 4)")
    ws_parser.add_argument("--lambda", dest="lam", type=float, default=0.2, help="Asymmetry parameter (default: 0.2)")
    ws_parser.add_argument("--ratio", type=float, default=3.0, help="Variance ratio (default: 3.0)")
    ws_parser.add_argument("--rule", choices=[r.value for r in AtildeRule], help="Parent-pair sign rule (default: henderson)")
    ws_parser.add_argument("--unknown-fraction", type=float, help="Probability of an unknown parent (default: 0.1)")
    ws_parser.add_argument("--seed", type=int, default=1, help="Pedigree seed (default: 1)")
    ws_parser.add_argument("--out", required=True, help="Output Matrix Market file")

    dirac_parser = families.add_parser("dirac", help="Free Wilson-Dirac matrix on a periodic lattice")
    for extent in ("n0", "n1", "n2", "n3"):
        dirac_parser.add_argument(f"--{extent}", type=int, default=4, help=f"Lattice extent {extent} (default: 4)")
    dirac_parser.add_argument("--k", type=float, default=0.1, help="Hopping parameter K (default: 0.1)")
    dirac_parser.add_argument("--gamma", choices=[g.value for g in GammaConvention], help="Gamma-matrix convention (default: dirac)")
    dirac_parser.add_argument("--out", required=True, help="Output Matrix Market file")

    # Precheck command
    precheck_parser = subparsers.add_parser("precheck", help="Estimate sp(T) and sp(S)")
    precheck_parser.add_argument("--matrix", required=True, help="Matrix Market file of C")
    precheck_parser.add_argument("--json", action="store_true", help="Output in JSON format")

    # Invert commands
    _add_invert_arguments(subparsers.add_parser("invert-cc", help="Correlated Chains estimate of tr(Q C^-1)"))
    _add_invert_arguments(subparsers.add_parser("invert-gs", help="Gibbs-sampler estimate (hermitian C)"))
    _add_invert_arguments(subparsers.add_parser("invert-se", help="Stochastic Estimation baseline"), se=True)

    # Oracle command
    oracle_parser = subparsers.add_parser("oracle", help="Dense LU value of tr(Q C^-1)")
    oracle_parser.add_argument("--matrix", required=True, help="Matrix Market file of C")
    oracle_parser.add_argument("--q", default="identity", help="Q: identity, diag:<index file> or mm:<file>")
    oracle_parser.add_argument("--report", help="Write the JSON run report here")

    # Compare / report commands
    compare_parser = subparsers.add_parser("compare", help="Compare two run reports on the same target")
    compare_parser.add_argument("a", help="First report (JSON)")
    compare_parser.add_argument("b", help="Second report (JSON)")

    report_parser = subparsers.add_parser("report", help="Render run reports as a table")
    report_parser.add_argument("reports", nargs="+", help="Report files (JSON)")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 2

    try:
        settings = reload_settings(args.config) if args.config else get_settings()
    except ConfigError as e:
        print(f"❌ Error: {e.message}", file=sys.stderr)
        return e.exit_code

    # Setup logging
    setup_logging(args.verbose, settings)

    commands = {
        "generate": generate_command,
        "precheck": precheck_command,
        "invert-cc": lambda a, s: invert_command(a, s, Method.CC),
        "invert-gs": lambda a, s: invert_command(a, s, Method.GS),
        "invert-se": lambda a, s: invert_command(a, s, Method.SE),
        "oracle": oracle_command,
        "compare": compare_command,
        "report": report_command,
    }

    # Execute command
    try:
        return commands[args.command](args, settings)
    except InversionError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid parameters: {e}")
        return ConfigError.exit_code
    except KeyboardInterrupt:
        print("\n⚠️  Operation cancelled by user", file=sys.stderr)
        return 130
    except Exception as e:
        logger.exception(f"Unexpected error: {str(e)}")
        return 1
