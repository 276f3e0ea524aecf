from ...serializers import StateFile, load_state
from ...states import purify
from ..base import QotkitCommand


class Command(QotkitCommand):

    help = "Write the canonical purification vec(sqrt(σ)) of a state."

    def add_arguments(self, parser):
        self.add_file_argument(parser, "--state", "State file of the state to purify")
        self.add_file_argument(parser, "--out", "Output state file of kind 'pure'")

    def handle(self, *args, **options):
        psi = purify(load_state(options["state"]))
        StateFile.from_object(psi).dump(options["out"])
        if options["verbosity"] > 1:
            self.stdout.write(f"Wrote a pure state on dims {list(psi.shape.dims)} to {options['out']}")
