from ...classical import dual_w1, hamming_cost, kantorovich
from ...serializers import build_report, load_distribution, load_metric, state_inputs, write_json
from ..base import QotkitCommand


class Command(QotkitCommand):

    help = "Classical W1 distance between two distributions."

    def add_arguments(self, parser):
        self.add_file_argument(parser, "--p", "Distribution file")
        self.add_file_argument(parser, "--q", "Distribution file")
        parser.add_argument(
            "--metric",
            default="hamming",
            help="'hamming' for the Hamming cube or a metric file",
        )
        self.add_file_argument(parser, "--out", "Write a JSON report to this file", required=False)

    def handle(self, *args, **options):
        p, q = load_distribution(options["p"]), load_distribution(options["q"])
        if options["metric"] == "hamming":
            n = p.size.bit_length() - 1
            if p.size < 2 or 2 ** n != p.size:
                raise self.input_error(f"Hamming metric needs 2^n outcomes, got {p.size}")
            metric = hamming_cost(n)
        else:
            metric = load_metric(options["metric"])

        metric.check_metric()
        value = kantorovich(p, q, metric).value
        self.write_value("", value)

        if options.get("out"):
            potential = dual_w1(p, q, metric).potential
            report = build_report(
                "classical_w1", state_inputs(p, q, metric), value, "Optimal", witness=potential
            )
            write_json(options["out"], report)
