import logging

from django.conf import settings

from feedpuf.commands import ToolkitCommand
from feedpuf.exceptions import UsageError
from feedpuf.files import render_json, sidecar_path, write_atomic
from feedpuf.tables import format_table

from pufs.bits import as_batch
from pufs.challenges import sample_challenges
from pufs.cli import (
    add_device_arguments,
    add_env_arguments,
    add_instance_arguments,
    device_config,
    device_from_options,
    env_from_options,
    instance_from_options,
)
from pufs.cyclic import crm_from_trajectory, derive_key, mode_histogram, parse_challenge
from pufs.models import Trajectory
from pufs.serializers import render_json_lines, trajectory_record

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = "Collect challenge-response modes (CRMs) for held challenges and summarize their modes."

    def add_arguments(self, parser):
        add_instance_arguments(parser)
        add_device_arguments(parser)
        add_env_arguments(parser)
        parser.add_argument("--challenge", action="append", default=[])
        parser.add_argument("--random", type=int, help="draw this many distinct random challenges")
        parser.add_argument("--challenge-seed", type=int, default=0)
        parser.add_argument("--cycles", type=int, default=settings.FEEDPUF["CYCLES"])
        parser.add_argument("--key-bytes", type=int, help="also derive a device key from the pseudo-random CRMs")
        parser.add_argument("-o", "--output", help="write CRM trajectories as JSON lines")

    def handle(self, *args, **options):
        inst = instance_from_options(options)
        device = device_from_options(options, inst)
        env = env_from_options(options)
        if options["noise_seed"] is not None:
            raise UsageError("CRMs are classified on noiseless trajectories; drop --noise-seed")

        if options["random"]:
            challenges = sample_challenges(inst.challenge_width, options["random"], options["challenge_seed"])
        elif options["challenge"]:
            challenges = as_batch(
                [parse_challenge(text, inst.challenge_width) for text in options["challenge"]],
                inst.challenge_width,
            )
        else:
            raise UsageError("pass --challenge or --random")

        cycles = options["cycles"]
        trajectories = device.simulate(challenges, cycles, env)
        crms = [crm_from_trajectory(Trajectory(ch, traj)) for ch, traj in zip(challenges, trajectories)]
        histogram = mode_histogram(crm.mode for crm in crms)
        logger.info("collected %d CRMs: %s", len(crms), histogram)

        rows = [(crm.challenge, str(crm.mode), len(crm.response_set)) for crm in crms]
        summary = format_table(["challenge", "mode", "responses"], rows)
        summary += "\n\n" + format_table(["mode", "count"], histogram.items())
        if options["key_bytes"] is not None:
            summary += f"\n\nkey {derive_key(crms, options['key_bytes']).hex()}"
        self.emit_text(summary)

        if options["output"]:
            records = [
                trajectory_record(Trajectory(ch, responses), crm.mode)
                for ch, responses, crm in zip(challenges, trajectories, crms)
            ]
            write_atomic(options["output"], render_json_lines(records))
            config = device_config(device, env)
            config.update(
                cycles=cycles,
                challenge_seed=options["challenge_seed"] if options["random"] else None,
                num_challenges=len(crms),
            )
            write_atomic(
                sidecar_path(options["output"]),
                render_json({"config": config, "mode_histogram": histogram}),
            )
