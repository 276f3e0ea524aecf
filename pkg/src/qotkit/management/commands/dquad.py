from ...quadratic import dquad, dquad_program, plan_cost
from ...serializers import (
    build_report,
    encode_complex_array,
    load_channel,
    load_quadratic_cost,
    load_state,
    state_inputs,
    write_json,
)
from ..base import QotkitCommand


class Command(QotkitCommand):

    help = "Quadratic transport cost D(σ, ρ)^2 from --a (σ) to --b (ρ)."

    def add_arguments(self, parser):
        self.add_file_argument(parser, "--a", "State file of the source state σ")
        self.add_file_argument(parser, "--b", "State file of the target state ρ")
        self.add_file_argument(parser, "--cost", "Cost file: a list of observables")
        self.add_file_argument(
            parser, "--plan", "Channel file of a transport plan to evaluate as well", required=False
        )
        self.add_file_argument(parser, "--out", "Write a JSON report to this file", required=False)
        self.add_file_argument(
            parser, "--dump-program", "Write the conic program in the text debug format", required=False
        )

    def handle(self, *args, **options):
        sigma, rho = load_state(options["a"]), load_state(options["b"])
        cost = load_quadratic_cost(options["cost"])
        if options.get("dump_program"):
            with open(options["dump_program"], "w", encoding="utf-8") as fh:
                dquad_program(sigma, rho, cost).dump(fh)

        result = dquad(sigma, rho, cost)
        self.write_value("", result.value_squared)
        inputs = state_inputs(sigma, rho, cost)
        extra = {"coupling": encode_complex_array(result.coupling.state.mat), "distance": result.value}
        if options.get("plan"):
            channel = load_channel(options["plan"])
            extra["planCost"] = plan_cost(channel, sigma, rho, cost)
            self.write_value("plan", extra["planCost"])
            inputs += state_inputs(channel)

        if options.get("out"):
            write_json(options["out"], build_report("dquad", inputs, result.value_squared, result.status, **extra))
