from ...serializers import StateFile, build_report, load_observable, state_inputs, write_json
from ...wasserstein import lipschitz
from ..base import QotkitCommand


class Command(QotkitCommand):

    help = "Quantum Lipschitz constant of an n-qubit observable."

    def add_arguments(self, parser):
        self.add_file_argument(parser, "--obs", "State file of kind 'observable'")
        self.add_file_argument(parser, "--out", "Write a JSON report to this file", required=False)

    def handle(self, *args, **options):
        A = load_observable(options["obs"])
        result = lipschitz(A)
        self.write_value("", result.value)
        for site, entry in enumerate(result.per_site):
            self.write_value(f"site {site}", entry.t)

        if options.get("out"):
            per_site = [
                {"t": entry.t, "minimizer": StateFile.from_object(entry.minimizer).to_dict()}
                for entry in result.per_site
            ]
            report = build_report("lipschitz", state_inputs(A), result.value, "Optimal", perSite=per_site)
            write_json(options["out"], report)
