import logging

from django.conf import settings

from feedpuf.commands import ToolkitCommand
from feedpuf.files import read_json

from metrics.serializers import MetricReportSerializer, Table2ConfigSerializer
from metrics.suite import metric_table, run_table2_experiment

logger = logging.getLogger(__name__)


def default_config() -> dict:
    table2 = settings.FEEDPUF["TABLE2"]
    return {
        "challenge_width": table2["challenge_width"],
        "response_width": table2["response_width"],
        "feedback": dict(table2["feedback"]),
        "distinct_designs": table2["distinct_designs"],
        "variation_overrides": {key: dict(value) for key, value in table2["variation_overrides"].items()},
        **settings.FEEDPUF["METRICS"],
        "variation": dict(settings.FEEDPUF["VARIATION"]),
        "envs": [dict(env) for env in settings.FEEDPUF["ENV_SWEEP"]],
    }


class Command(ToolkitCommand):
    help = (
        "Compare uniqueness, uniformity and reliability of acyclic and cyclic designs "
        "for every PUF category over one shared lot."
    )

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON config; its keys override the defaults")
        parser.add_argument("-k", type=int)
        parser.add_argument("-m", type=int)
        parser.add_argument("-s", type=int)
        parser.add_argument("-c", type=int)
        parser.add_argument("--lot-seed", type=int)
        parser.add_argument("--challenge-seed", type=int)
        parser.add_argument("--feedback-seed", type=int)
        parser.add_argument("--noise-seed", type=int)
        parser.add_argument(
            "--shared-taps", action="store_true", help="rewire the acyclic instances with one set of taps"
        )
        parser.add_argument("-o", "--output", help="write rows and resolved config as JSON")

    def handle(self, *args, **options):
        data = default_config()
        if options["config"]:
            data.update(read_json(options["config"]))
        for name in ("k", "m", "s", "c", "lot_seed", "challenge_seed", "feedback_seed", "noise_seed"):
            if options[name] is not None:
                data[name] = options[name]
        if options["shared_taps"]:
            data["distinct_designs"] = False
        config = self.validated(Table2ConfigSerializer, data)

        reports = run_table2_experiment(config)
        self.emit_text(metric_table(reports))
        if options["output"]:
            self.emit_json(
                {
                    "config": Table2ConfigSerializer(config).data,
                    "rows": MetricReportSerializer(reports, many=True).data,
                },
                options["output"],
            )
