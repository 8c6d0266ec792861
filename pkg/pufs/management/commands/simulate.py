import logging

from django.conf import settings

from feedpuf.commands import ToolkitCommand
from feedpuf.files import render_json, sidecar_path, write_atomic

from pufs.cli import (
    add_device_arguments,
    add_env_arguments,
    add_instance_arguments,
    device_config,
    device_from_options,
    env_from_options,
    instance_from_options,
)
from pufs.cyclic import classify_mode, parse_challenge
from pufs.serializers import render_json_lines, trajectory_record

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = (
        "Hold one or more external challenges and print the response of every cycle. "
        "Noiseless unless --noise-seed is given."
    )

    def add_arguments(self, parser):
        add_instance_arguments(parser)
        add_device_arguments(parser)
        add_env_arguments(parser)
        parser.add_argument(
            "--challenge", action="extend", nargs="+", required=True, help="MSB-first bit strings (repeatable)"
        )
        parser.add_argument("--cycles", type=int, default=settings.FEEDPUF["CYCLES"])
        parser.add_argument("-o", "--output", help="write trajectories as JSON lines")

    def handle(self, *args, **options):
        inst = instance_from_options(options)
        device = device_from_options(options, inst)
        env = env_from_options(options)
        noise_seed = options["noise_seed"]

        trajectories = []
        for index, text in enumerate(options["challenge"]):
            ext = parse_challenge(text, inst.challenge_width)
            seed = None if noise_seed is None else [noise_seed, index]
            trajectories.append(device.trajectory(ext, options["cycles"], env, seed))

        lines = []
        for text, traj in zip(options["challenge"], trajectories):
            if len(trajectories) > 1:
                lines.append(f"# {text}")
            lines.extend(traj.response_strings())
        self.emit_text("\n".join(lines))

        if options["output"]:
            # modes are only meaningful on noiseless runs
            records = [
                trajectory_record(traj, classify_mode(traj) if noise_seed is None else None)
                for traj in trajectories
            ]
            write_atomic(options["output"], render_json_lines(records))
            config = device_config(device, env)
            config.update(cycles=options["cycles"], noise_seed=noise_seed)
            write_atomic(sidecar_path(options["output"]), render_json({"config": config}))
            logger.info("wrote %d trajectories to %s", len(records), options["output"])