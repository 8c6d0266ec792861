import logging

from django.conf import settings

from feedpuf.commands import ToolkitCommand
from feedpuf.files import read_json

from attacks.experiments import attack_table, run_table1_experiment
from attacks.features import FeatureMap
from attacks.serializers import Table1ConfigSerializer, Table1RowSerializer
from attacks.training import ModelKind

logger = logging.getLogger(__name__)

SEEDS = ("lot_seed", "instance_seed", "challenge_seed", "feedback_seed", "fault_seed", "split_seed", "train_seed")


def default_config() -> dict:
    table1 = settings.FEEDPUF["TABLE1"]
    attack = settings.FEEDPUF["ATTACK"]
    return {
        "challenge_width": table1["challenge_width"],
        "num_challenges": table1["num_challenges"],
        "cycles": table1["cycles"],
        "feedback": dict(table1["feedback"]),
        "faults": dict(table1["faults"]),
        "feature_map": table1["feature_map"],
        "hyper": dict(attack),
        "variation": dict(settings.FEEDPUF["VARIATION"]),
    }


class Command(ToolkitCommand):
    help = (
        "Attack acyclic, cyclic and faulty cyclic designs of every PUF category at the same "
        "challenge budget and tabulate model accuracy."
    )

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON config; its keys override the defaults")
        parser.add_argument("--nc", type=int, help="challenge width")
        parser.add_argument("--challenges", type=int, help="distinct challenges per dataset")
        parser.add_argument("--cycles", type=int)
        parser.add_argument("--map", choices=FeatureMap.values)
        parser.add_argument("--model", choices=ModelKind.values)
        parser.add_argument("--epochs", type=int)
        parser.add_argument("--dedupe", action="store_true", help="one row per distinct CRP-equivalent")
        for seed in SEEDS:
            parser.add_argument("--" + seed.replace("_", "-"), type=int)
        parser.add_argument("--jobs", type=int, default=settings.FEEDPUF["JOBS"])
        parser.add_argument("-o", "--output", help="write rows and resolved config as JSON")

    def handle(self, *args, **options):
        data = default_config()
        if options["config"]:
            document = read_json(options["config"])
            data.update(document)
        flags = {
            "challenge_width": options["nc"],
            "num_challenges": options["challenges"],
            "cycles": options["cycles"],
            "feature_map": options["map"],
            "model": options["model"],
            **{seed: options[seed] for seed in SEEDS},
        }
        data.update({key: value for key, value in flags.items() if value is not None})
        if options["epochs"] is not None:
            data["hyper"] = {**data["hyper"], "epochs": options["epochs"]}
        if options["dedupe"]:
            data["dedupe"] = True
        config = self.validated(Table1ConfigSerializer, data)

        rows = run_table1_experiment(config, jobs=options["jobs"])
        self.emit_text(attack_table(rows))
        if options["output"]:
            self.emit_json(
                {
                    "config": Table1ConfigSerializer(config).data,
                    "rows": Table1RowSerializer(rows, many=True).data,
                },
                options["output"],
            )
