import logging

import numpy as np
from django.conf import settings

from feedpuf.commands import ToolkitCommand
from feedpuf.exceptions import UsageError
from feedpuf.tables import format_table

from pufs.challenges import sample_challenges
from pufs.cli import (
    add_device_arguments,
    add_instance_arguments,
    device_config,
    device_from_options,
    instance_from_options,
)
from pufs.cyclic import CyclicPuf, classify_responses, mode_histogram
from pufs.faults import fault_sites

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = (
        "Build a faulty device (explicit --faults or seeded --fault-count) and compare it "
        "with its clean counterpart over random held challenges."
    )

    def add_arguments(self, parser):
        add_instance_arguments(parser)
        add_device_arguments(parser)
        parser.add_argument("--challenges", type=int, default=1000)
        parser.add_argument("--challenge-seed", type=int, default=0)
        parser.add_argument("--cycles", type=int, default=settings.FEEDPUF["CYCLES"])
        parser.add_argument("-o", "--output", help="write the report as JSON")

    def handle(self, *args, **options):
        inst = instance_from_options(options)
        faulty = device_from_options(options, inst)
        if not faulty.faults:
            raise UsageError("no faults requested; pass --faults or --fault-count")
        clean = CyclicPuf(inst, faulty.fb)

        challenges = sample_challenges(inst.challenge_width, options["challenges"], options["challenge_seed"])
        cycles = options["cycles"]
        clean_traj = clean.simulate(challenges, cycles)
        faulty_traj = faulty.simulate(challenges, cycles)

        changed_rows = np.any(clean_traj != faulty_traj, axis=2)
        report = {
            "config": {
                **device_config(faulty),
                "challenges": len(challenges),
                "challenge_seed": options["challenge_seed"],
                "fault_seed": options["fault_seed"] if options["fault_count"] is not None else None,
                "cycles": cycles,
            },
            "available_sites": len(fault_sites(inst, faulty.fb)),
            "changed_row_fraction": float(changed_rows.mean()),
            "changed_challenge_fraction": float(changed_rows.any(axis=1).mean()),
            "bit_flip_rate": [float(rate) for rate in (clean_traj != faulty_traj).mean(axis=(0, 1))],
            "clean_modes": mode_histogram(map(classify_responses, clean_traj)),
            "faulty_modes": mode_histogram(map(classify_responses, faulty_traj)),
        }
        logger.info(
            "%d faults changed %.1f%% of rows", len(faulty.faults), 100 * report["changed_row_fraction"]
        )

        if options["output"]:
            self.emit_json(report, options["output"])
        table = format_table(
            ["site", "index", "kind"],
            [(fault.site.kind, fault.site.index, fault.kind) for fault in faulty.faults.faults],
        )
        table += "\n\n" + format_table(
            ["", "binary", "steady_state", "oscillating", "pseudo_random"],
            [
                ("clean", *report["clean_modes"].values()),
                ("faulty", *report["faulty_modes"].values()),
            ],
        )
        table += f"\n\nchanged rows: {100 * report['changed_row_fraction']:.2f}%"
        self.emit_text(table)
