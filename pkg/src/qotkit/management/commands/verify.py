from django.core.management.base import CommandError

from ...serializers import build_report, write_json
from ...suites import SUITES, run_suite
from ..base import EXIT_VIOLATION, QotkitCommand


class Command(QotkitCommand):

    help = "Run randomized verification suites; exits with 1 when any check is violated."

    def add_arguments(self, parser):
        parser.add_argument(
            "--suite",
            required=True,
            help=f"One of {', '.join(SUITES)} or all",
        )
        parser.add_argument("--n", type=int, default=2, help="Number of qubits")
        parser.add_argument("--trials", type=int, default=100, help="Trials per suite")
        parser.add_argument("--seed", type=int, default=0, help="Base seed of the trial generators")
        parser.add_argument(
            "--tol",
            type=float,
            default=None,
            help="Tighten every suite tolerance to at most this value",
        )
        self.add_file_argument(parser, "--report", "Write a JSON report to this file", required=False)
        self.add_file_argument(parser, "--csv", "Write one row per check to this CSV file", required=False)

    def handle(self, *args, **options):
        name = options["suite"]
        if name != "all" and name not in SUITES:
            raise self.input_error(f"Unknown suite {name!r}, expected one of {', '.join(SUITES)} or all")
        reports = run_suite(name, options["n"], options["trials"], options["seed"], tol=options["tol"])

        for report in reports:
            status = "ok" if report.passed else "FAILED"
            self.stdout.write(
                f"{report.suite}: {status} {len(report.violations)} violations in {report.trials} trials"
                f" ({report.skipped} skipped)"
            )

        if options.get("report"):
            suites = [report.to_dict() for report in reports]
            value = float(sum(len(report.violations) for report in reports))
            out = build_report(
                "verify",
                {"suite": name, "n": options["n"], "trials": options["trials"], "tol": options["tol"]},
                value,
                "Optimal" if value == 0 else "Violations",
                seed=options["seed"],
                suite=suites,
            )
            write_json(options["report"], out)
        if options.get("csv"):
            with open(options["csv"], "w", encoding="utf-8", newline="") as fh:
                for index, report in enumerate(reports):
                    text = report.to_csv()
                    fh.write(text if index == 0 else text.split("\n", 1)[1])

        violations = sum(len(report.violations) for report in reports)
        if violations:
            raise CommandError(f"{violations} violations", returncode=EXIT_VIOLATION)
