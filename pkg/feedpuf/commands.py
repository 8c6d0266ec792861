import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from .exceptions import FeedpufError
from .files import render_json, write_atomic

logger = logging.getLogger(__name__)


class ToolkitCommand(BaseCommand):
    """Base for every feedpuf command: maps domain failures onto exit codes."""

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except serializers.ValidationError as exc:
            raise CommandError(f"ConfigurationError: {exc.detail}", returncode=3)
        except FeedpufError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=exc.exit_code)
        except OSError as exc:
            raise CommandError(f"IOError: {exc}", returncode=4)

    def validated(self, serializer_class, data, **kwargs):
        serializer = serializer_class(data=data, **kwargs)
        serializer.is_valid(raise_exception=True)
        return serializer.validated_data

    def emit_json(self, data, path=None):
        payload = render_json(data)
        if path:
            write_atomic(path, payload)
            logger.info("wrote %s", path)
        else:
            self.stdout.write(payload.decode("utf-8"), ending="")

    def emit_text(self, text, path=None):
        if not text.endswith("\n"):
            text += "\n"
        if path:
            write_atomic(path, text)
            logger.info("wrote %s", path)
        else:
            self.stdout.write(text, ending="")
