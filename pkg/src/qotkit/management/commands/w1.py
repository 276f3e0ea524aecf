from ...serializers import StateFile, build_report, encode_complex_array, load_state, state_inputs, write_json
from ...wasserstein import w1, w1_program, w1_with_dual
from ..base import QotkitCommand


class Command(QotkitCommand):

    help = "Quantum W1 distance between two n-qubit states."

    def add_arguments(self, parser):
        self.add_file_argument(parser, "--a", "State file of the first state")
        self.add_file_argument(parser, "--b", "State file of the second state")
        parser.add_argument(
            "--dual",
            action="store_true",
            help="Also solve for the dual witness and report the primal-dual gap",
        )
        self.add_file_argument(parser, "--out", "Write a JSON report to this file", required=False)
        self.add_file_argument(
            parser, "--dump-program", "Write the conic program in the text debug format", required=False
        )

    def handle(self, *args, **options):
        rho, sigma = load_state(options["a"]), load_state(options["b"])
        if options.get("dump_program"):
            with open(options["dump_program"], "w", encoding="utf-8") as fh:
                w1_program(rho, sigma).dump(fh)

        if options.get("dual"):
            result, dual = w1_with_dual(rho, sigma)
        else:
            result = w1(rho, sigma)
        self.write_value("", result.value)
        extra = {"decomposition": [encode_complex_array(X) for X in result.decomposition]}
        if options.get("dual"):
            self.write_value("dual", dual.value)
            self.write_value("gap", abs(result.value - dual.value))
            extra["witness"] = StateFile.from_object(dual.witness).to_dict()
            extra["dualValue"] = dual.value

        if options.get("out"):
            report = build_report("w1", state_inputs(rho, sigma), result.value, result.status, **extra)
            write_json(options["out"], report)
