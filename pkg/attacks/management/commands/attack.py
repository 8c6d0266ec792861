import logging

from django.conf import settings

from feedpuf.commands import ToolkitCommand
from feedpuf.tables import format_table, pct

from attacks.features import FeatureMap
from attacks.serializers import AttackModelSerializer, AttackReportSerializer, HyperparametersSerializer
from attacks.training import Hyperparameters, ModelKind, evaluate, train
from datasets.generation import split_80_20
from datasets.storage import read_dataset

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = "Train a modeling attack on a dataset's train split and report accuracy on its test split."

    def add_arguments(self, parser):
        defaults = settings.FEEDPUF["ATTACK"]
        parser.add_argument("--dataset", required=True, help="dataset written by `dataset`")
        parser.add_argument("--map", choices=FeatureMap.values, default=FeatureMap.PARITY)
        parser.add_argument("--model", choices=ModelKind.values, default=ModelKind.LR)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--split-seed", type=int, default=0, help="used when the dataset carries no split")
        parser.add_argument("--learning-rate", type=float, default=defaults["learning_rate"])
        parser.add_argument("--epochs", type=int, default=defaults["epochs"])
        parser.add_argument("--batch-size", type=int, default=defaults["batch_size"])
        parser.add_argument("--hidden", type=int, default=defaults["hidden"])
        parser.add_argument("--save-model", help="write the trained weights as JSON")
        parser.add_argument("-o", "--output", help="write the report as JSON")

    def handle(self, *args, **options):
        hyper = Hyperparameters(
            **self.validated(
                HyperparametersSerializer,
                {name: options[name] for name in ("learning_rate", "epochs", "batch_size", "hidden")},
            )
        )
        ds = read_dataset(options["dataset"])
        if not ds.is_split:
            ds = split_80_20(ds, options["split_seed"])

        model = train(ds, options["map"], options["model"], hyper, options["seed"])
        report = evaluate(model, ds)
        confusion = report.confusion
        self.emit_text(
            format_table(
                ["dataset", "map", "model", "train rows", "test rows", "accuracy", "tp/tn/fp/fn"],
                [
                    (
                        ds.instance_id,
                        model.feature_map,
                        model.kind,
                        report.train_rows,
                        report.test_rows,
                        pct(report.test_accuracy_pct),
                        "/".join(str(confusion[key]) for key in ("tp", "tn", "fp", "fn")),
                    )
                ],
            )
        )

        if options["save_model"]:
            self.emit_json(AttackModelSerializer(model).data, options["save_model"])
        if options["output"]:
            self.emit_json(
                {
                    "dataset": str(options["dataset"]),
                    "meta": ds.meta,
                    "feature_map": str(model.feature_map),
                    "model": str(model.kind),
                    "train_meta": model.train_meta,
                    "report": AttackReportSerializer(report).data,
                },
                options["output"],
            )
