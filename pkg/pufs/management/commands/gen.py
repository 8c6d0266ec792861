import logging

from feedpuf.commands import ToolkitCommand

from pufs.cli import add_instance_arguments, instance_from_options
from pufs.serializers import dump_instance

logger = logging.getLogger(__name__)


class Command(ToolkitCommand):
    help = "Sample a PUF instance from a variation model and export it as JSON."

    def add_arguments(self, parser):
        add_instance_arguments(parser)
        parser.add_argument("-o", "--output", help="instance JSON path (stdout if omitted)")

    def handle(self, *args, **options):
        inst = instance_from_options(options)
        logger.info("sampled %s", inst.instance_id)
        self.emit_json(dump_instance(inst), options["output"])
        if options["output"]:
            variation = inst.variation
            self.emit_text(
                "\n".join(
                    [
                        f"instance   {inst.instance_id}",
                        f"category   {inst.category.label}",
                        f"challenge  {inst.challenge_width} bits",
                        f"response   {inst.response_width} bits",
                        f"variation  mu={variation.mu} sigma_random={variation.sigma_random} "
                        f"sigma_systematic={variation.sigma_systematic} "
                        f"jitter_sigma={variation.jitter_sigma}",
                    ]
                )
            )
