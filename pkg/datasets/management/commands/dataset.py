import logging

from feedpuf.commands import ToolkitCommand
from feedpuf.exceptions import UsageError
from feedpuf.files import read_json
from feedpuf.tables import format_table, pct

from datasets.generation import generate_acyclic, generate_cyclic, replay_dataset, split_80_20
from datasets.serializers import GenerationSpecSerializer
from datasets.storage import write_dataset
from pufs.cli import (
    add_device_arguments,
    add_env_arguments,
    add_instance_arguments,
    device_from_options,
    env_from_options,
    instance_from_options,
)
from pufs.models import PufForm

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = (
        "Generate a CRP (acyclic) or CRP-equivalent (cyclic) dataset, split it 80/20 by "
        "challenge and write it as CSV or JSON lines (.gz for gzip) with a .meta.json sidecar. "
        "--config / --replay take a generation spec, e.g. a sidecar's \"meta\" object."
    )

    def add_arguments(self, parser):
        add_instance_arguments(parser)
        add_device_arguments(parser)
        add_env_arguments(parser)
        parser.add_argument("--form", choices=PufForm.values, default=PufForm.ACYCLIC)
        parser.add_argument("--challenges", type=int, default=1000, help="number of distinct external challenges")
        parser.add_argument("--challenge-seed", type=int, default=0)
        parser.add_argument("--cycles", type=int, default=8, help="cycles per held challenge (cyclic forms)")
        parser.add_argument("--dedupe", action="store_true", help="keep one row per distinct CRP-equivalent")
        parser.add_argument("--split-seed", type=int, default=0)
        parser.add_argument("--no-split", action="store_true")
        parser.add_argument("--config", help="generation spec JSON instead of flags")
        parser.add_argument("--replay", help="sidecar (.meta.json) whose rows should be regenerated")
        parser.add_argument("-o", "--output", required=True, help="dataset path (.csv, .jsonl, optionally .gz)")

    def handle(self, *args, **options):
        source = options["replay"] or options["config"]
        if source:
            document = read_json(source)
            if options["replay"]:
                document = document.get("meta", document)
            spec = self.validated(GenerationSpecSerializer, document)
            ds = replay_dataset(GenerationSpecSerializer(spec).data)
        else:
            ds = self.generate(options)
            if not options["no_split"]:
                ds = split_80_20(ds, options["split_seed"])

        write_dataset(ds, options["output"])
        rows = [
            ("rows", len(ds)),
            ("challenges", ds.meta["num_challenges"]),
            ("crp-equivalents", ds.crp_equivalents()),
            ("train / test", f"{len(ds.train_idx)} / {len(ds.test_idx)}" if ds.is_split else "unsplit"),
            ("ones in responses", pct(100.0 * ds.responses.mean()) if len(ds) else "n/a"),
        ]
        self.emit_text(format_table(["dataset", str(options["output"])], rows))

    def generate(self, options):
        inst = instance_from_options(options)
        env = env_from_options(options)
        if options["noise_seed"] is not None:
            raise UsageError("datasets are generated noiselessly; drop --noise-seed")
        form = PufForm(options["form"])
        if form == PufForm.ACYCLIC:
            if options["taps"] or options["faults"] or options["fault_count"] is not None:
                raise UsageError("acyclic datasets take no --taps or faults; use --form cyclic")
            return generate_acyclic(inst, options["challenges"], options["challenge_seed"], env)

        device = device_from_options(options, inst)
        if form == PufForm.FAULTY_CYCLIC and not device.faulty:
            raise UsageError("--form faulty_cyclic needs --faults or --fault-count")
        if form == PufForm.CYCLIC and device.faulty:
            raise UsageError("faults given; use --form faulty_cyclic")
        return generate_cyclic(
            device, options["challenges"], options["cycles"], options["challenge_seed"], env, dedupe=options["dedupe"]
        )
