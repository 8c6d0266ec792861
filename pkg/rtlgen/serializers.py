from rest_framework import serializers

from feedpuf.exceptions import ConfigurationError
from pufs.models import PufCategory
from pufs.serializers import FeedbackConfigSerializer

from .emitter import IDENTIFIER, RtlConfig


class RtlConfigSerializer(serializers.Serializer):
    category = serializers.ChoiceField(choices=PufCategory.choices)
    challenge_width = serializers.IntegerField(min_value=1)
    response_width = serializers.IntegerField(min_value=1)
    fb = FeedbackConfigSerializer(required=False)
    module_name = serializers.CharField(allow_blank=True, required=False, default="")
    dont_touch = serializers.BooleanField(required=False, default=False)

    def validate_module_name(self, value):
        if value and not IDENTIFIER.match(value):
            raise serializers.ValidationError(f"{value!r} is not a Verilog identifier")
        return value

    def validate(self, data):
        try:
            self.create(data)
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc))
        return data

    def create(self, validated_data):
        fb = FeedbackConfigSerializer().create(validated_data.get("fb") or {"taps": []})
        return RtlConfig(
            category=validated_data["category"],
            challenge_width=validated_data["challenge_width"],
            response_width=validated_data["response_width"],
            fb=fb,
            module_name=validated_data.get("module_name", ""),
            dont_touch=validated_data.get("dont_touch", False),
        )
