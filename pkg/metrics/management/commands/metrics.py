import logging

from django.conf import settings

from feedpuf.commands import ToolkitCommand
from feedpuf.exceptions import UsageError
from pufs.challenges import challenge_space
from pufs.cli import CATEGORY_CHOICES, variation_from_options
from pufs.cyclic import parse_taps
from pufs.models import EnvCondition, PufCategory, PufForm, PufType
from pufs.serializers import EnvConditionSerializer, VariationModelSerializer

from metrics.serializers import MetricConfigSerializer, MetricReportSerializer
from metrics.suite import MetricConfig, acyclic_metric_suite, cyclic_metric_suite, lot_instances, metric_table

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = (
        "Uniqueness, uniformity and reliability of a population of k instances from one lot. "
        "Cyclic devices are reduced to one response per challenge by average bit value."
    )

    def add_arguments(self, parser):
        defaults = settings.FEEDPUF["METRICS"]
        parser.add_argument("--category", choices=CATEGORY_CHOICES, required=True)
        parser.add_argument("--form", choices=[PufForm.ACYCLIC, PufForm.CYCLIC], default=PufForm.ACYCLIC)
        parser.add_argument("--nc", type=int, default=4, help="challenge width")
        parser.add_argument("--n", type=int, default=4, help="response width")
        parser.add_argument("--taps", default="", help="resp:ch:pos[,...] or random:<f>:<seed>")
        parser.add_argument("--type", choices=PufType.values, help="weak: whole challenge space; strong: m random challenges")
        parser.add_argument("-k", type=int, default=defaults["k"], help="instances")
        parser.add_argument("-m", type=int, default=defaults["m"], help="challenges (strong PUFs)")
        parser.add_argument("-s", type=int, default=defaults["s"], help="condition samples for reliability")
        parser.add_argument("-c", type=int, default=defaults["c"], help="cycles per challenge (cyclic)")
        parser.add_argument("--lot-seed", type=int, default=0)
        parser.add_argument("--first-instance-seed", type=int, default=0)
        parser.add_argument("--challenge-seed", type=int, default=0)
        parser.add_argument("--noise-seed", type=int, default=0)
        parser.add_argument("--no-jitter", action="store_true", help="noiseless condition samples")
        parser.add_argument("--mu", type=float)
        parser.add_argument("--sigma-random", type=float)
        parser.add_argument("--sigma-systematic", type=float)
        parser.add_argument("--jitter-sigma", type=float)
        parser.add_argument("--json", action="store_true", help="print the JSON report instead of the table")
        parser.add_argument("-o", "--output", help="write the JSON report here")

    def handle(self, *args, **options):
        sizes = self.validated(MetricConfigSerializer, {name: options[name] for name in "kmsc"})
        cfg = MetricConfig(**sizes)
        category = PufCategory.from_alias(options["category"])
        vm = variation_from_options(options)
        n_c, n = options["nc"], options["n"]
        puf_type = options["type"] or (PufType.WEAK if n_c <= 16 else PufType.STRONG)
        instances = lot_instances(category, n_c, n, vm, options["lot_seed"], cfg.k, options["first_instance_seed"])
        challenges = challenge_space(n_c, puf_type, cfg.m, options["challenge_seed"])
        envs = [EnvCondition(env["delay_scale"], env["label"]) for env in settings.FEEDPUF["ENV_SWEEP"]]
        noise_seed = None if options["no_jitter"] else options["noise_seed"]

        fb = parse_taps(options["taps"], n_c, n)
        if options["form"] == PufForm.CYCLIC:
            report = cyclic_metric_suite(instances, fb, challenges, cfg, envs, noise_seed)
        elif len(fb):
            raise UsageError("--taps needs --form cyclic")
        else:
            report = acyclic_metric_suite(instances, challenges, cfg, envs, noise_seed)

        document = {
            "config": {
                "category": str(category),
                "form": str(options["form"]),
                "challenge_width": n_c,
                "response_width": n,
                "puf_type": str(puf_type),
                "num_challenges": len(challenges),
                "taps": [list(tap) for tap in fb.taps],
                **sizes,
                "variation": VariationModelSerializer(vm).data,
                "envs": EnvConditionSerializer(envs, many=True).data,
                "lot_seed": options["lot_seed"],
                "first_instance_seed": options["first_instance_seed"],
                "challenge_seed": options["challenge_seed"],
                "noise_seed": noise_seed,
            },
            "report": MetricReportSerializer(report).data,
        }
        if options["output"]:
            self.emit_json(document, options["output"])
        if options["json"]:
            self.emit_json(document)
        else:
            self.emit_text(metric_table([report]))
