import logging

from feedpuf.commands import ToolkitCommand
from feedpuf.exceptions import UsageError
from feedpuf.files import read_json
from feedpuf.tables import format_table

from pufs.challenges import sample_challenges
from pufs.cli import CATEGORY_CHOICES
from pufs.cyclic import parse_challenge, parse_taps
from pufs.models import PufCategory
from rtlgen.emitter import RtlConfig, emit_testbench, emit_verilog
from rtlgen.serializers import RtlConfigSerializer

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = (
        "Emit structural Verilog for an acyclic or cyclic APUF/ROPUF/BPUF and, optionally, "
        "a testbench that holds each challenge for --cycles clock cycles."
    )

    def add_arguments(self, parser):
        parser.add_argument("--config", help="RTL config JSON instead of flags")
        parser.add_argument("--category", choices=CATEGORY_CHOICES)
        parser.add_argument("--nc", type=int, default=64, help="challenge width")
        parser.add_argument("--n", type=int, default=1, help="response width")
        parser.add_argument("--taps", default="", help="resp:ch:pos[,...] or random:<f>:<seed>")
        parser.add_argument("--module-name", default="")
        parser.add_argument("--dont-touch", action="store_true", help="mark symmetric path instances dont_touch")
        parser.add_argument("--testbench", help="also write a testbench to this path")
        parser.add_argument("--challenge", action="append", default=[], help="testbench challenge (repeatable)")
        parser.add_argument("--random", type=int, help="testbench with this many distinct random challenges")
        parser.add_argument("--challenge-seed", type=int, default=0)
        parser.add_argument("--cycles", type=int, default=8, help="clock cycles per testbench challenge")
        parser.add_argument("-o", "--output", help="Verilog path (stdout if omitted)")

    def handle(self, *args, **options):
        if not options["testbench"] and (options["challenge"] or options["random"]):
            raise UsageError("challenges only apply to --testbench")
        cfg = self.config_from_options(options)
        self.emit_text(emit_verilog(cfg), options["output"])

        if options["testbench"]:
            if options["random"]:
                challenges = sample_challenges(cfg.challenge_width, options["random"], options["challenge_seed"])
            else:
                challenges = [parse_challenge(text, cfg.challenge_width) for text in options["challenge"]]
            self.emit_text(emit_testbench(cfg, challenges, options["cycles"]), options["testbench"])

        if options["output"]:
            self.emit_text(
                format_table(
                    ["module", "design", "challenge", "response", "taps", "dont_touch"],
                    [
                        (
                            cfg.name,
                            ("Cyc" if cfg.cyclic else "") + cfg.category.label,
                            cfg.challenge_width,
                            cfg.response_width,
                            str(cfg.fb) or "none",
                            "yes" if cfg.dont_touch else "no",
                        )
                    ],
                )
            )

    def config_from_options(self, options) -> RtlConfig:
        if options["config"]:
            data = self.validated(RtlConfigSerializer, read_json(options["config"]))
            return RtlConfigSerializer().create(data)
        if not options["category"]:
            raise UsageError("pass --config or --category")
        n_c, n = options["nc"], options["n"]
        if n_c < 1 or n < 1:
            raise UsageError("--nc and --n must be at least 1")
        return RtlConfig(
            category=PufCategory.from_alias(options["category"]),
            challenge_width=n_c,
            response_width=n,
            fb=parse_taps(options["taps"], n_c, n),
            module_name=options["module_name"],
            dont_touch=options["dont_touch"],
        )
