"""
Argument groups shared by the management commands that operate on one device.

Commands resolve defaults from ``settings.FEEDPUF`` here, so domain code never
reads settings itself.
"""

from django.conf import settings

from feedpuf.exceptions import UsageError
from feedpuf.files import read_json

from .cyclic import CyclicPuf, parse_taps
from .faults import parse_fault_spec, sample_fault_spec
from .models import NOMINAL, EnvCondition, PufCategory, VariationModel
from .serializers import dump_fault_spec, instance_summary, load_instance
from .simulation import sample_instance

CATEGORY_CHOICES = ["apuf", "ropuf", "bpuf", *PufCategory.values]


def add_instance_arguments(parser):
    group = parser.add_argument_group("instance")
    group.add_argument("--instance", help="instance JSON written by `gen`")
    group.add_argument("--category", choices=CATEGORY_CHOICES)
    group.add_argument("--nc", type=int, default=64, help="challenge width")
    group.add_argument("--n", type=int, default=1, help="response width")
    group.add_argument("--lot-seed", type=int, default=0)
    group.add_argument("--instance-seed", type=int, default=0)
    group.add_argument("--mu", type=float)
    group.add_argument("--sigma-random", type=float)
    group.add_argument("--sigma-systematic", type=float)
    group.add_argument("--jitter-sigma", type=float)


def add_device_arguments(parser):
    group = parser.add_argument_group("feedback and faults")
    group.add_argument("--taps", default="", help="resp:ch:pos[,...] or random:<f>:<seed>")
    group.add_argument("--faults", default="", help="site:index:kind[,...]")
    group.add_argument("--fault-count", type=int, help="sample this many faults instead")
    group.add_argument("--fault-seed", type=int, default=0)


def add_env_arguments(parser):
    group = parser.add_argument_group("environment")
    group.add_argument("--env-scale", type=float, default=1.0)
    group.add_argument("--env-label")
    group.add_argument("--noise-seed", type=int, help="enable jitter with this seed")


def variation_from_options(options) -> VariationModel:
    values = dict(settings.FEEDPUF["VARIATION"])
    for name in values:
        if options.get(name) is not None:
            values[name] = options[name]
    return VariationModel(**values)


def instance_from_options(options):
    if options.get("instance"):
        return load_instance(read_json(options["instance"]))
    if not options.get("category"):
        raise UsageError("pass --instance or --category")
    return sample_instance(
        PufCategory.from_alias(options["category"]),
        options["nc"],
        options["n"],
        variation_from_options(options),
        options["lot_seed"],
        options["instance_seed"],
    )


def device_from_options(options, inst) -> CyclicPuf:
    fb = parse_taps(options.get("taps"), inst.challenge_width, inst.response_width)
    if options.get("fault_count") is not None:
        if options.get("faults"):
            raise UsageError("--faults and --fault-count are mutually exclusive")
        faults = sample_fault_spec(inst, fb, options["fault_count"], options["fault_seed"])
    else:
        faults = parse_fault_spec(options.get("faults"))
    return CyclicPuf(inst, fb, faults)


def env_from_options(options) -> EnvCondition:
    scale = options.get("env_scale", 1.0)
    label = options.get("env_label") or ("nominal" if scale == 1.0 else "custom")
    if label == NOMINAL.label and scale == 1.0:
        return NOMINAL
    return EnvCondition(scale, label)


def device_config(device: CyclicPuf, env: EnvCondition | None = None) -> dict:
    config = {
        "instance": instance_summary(device.inst),
        "taps": [list(tap) for tap in device.fb.taps],
        "faults": dump_fault_spec(device.faults),
    }
    if env is not None:
        config["env"] = {"label": env.label, "delay_scale": env.delay_scale}
    return config