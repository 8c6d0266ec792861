from rest_framework import serializers

from pufs.models import PufCategory, PufType
from pufs.serializers import EnvConditionSerializer, VariationModelSerializer


class MetricConfigSerializer(serializers.Serializer):
    k = serializers.IntegerField(min_value=1)
    m = serializers.IntegerField(min_value=1)
    s = serializers.IntegerField(min_value=1)
    c = serializers.IntegerField(min_value=1)


class PairUniquenessSerializer(serializers.Serializer):
    pair = serializers.ListField(child=serializers.IntegerField())
    uniqueness_pct = serializers.FloatField()


class SampleReliabilitySerializer(serializers.Serializer):
    env = serializers.CharField()
    reliability_pct = serializers.FloatField()


class MetricReportSerializer(serializers.Serializer):
    design = serializers.CharField()
    uniqueness_pct = serializers.FloatField()
    uniformity_pct = serializers.FloatField()
    reliability_pct = serializers.FloatField()
    pairwise_uniqueness = PairUniquenessSerializer(many=True)
    instance_uniformity = serializers.ListField(child=serializers.FloatField())
    instance_reliability = serializers.ListField(child=serializers.FloatField())
    sample_reliability = SampleReliabilitySerializer(many=True)


class Table2ConfigSerializer(serializers.Serializer):
    """Everything one functional-metrics comparison depends on."""

    categories = serializers.ListField(
        child=serializers.ChoiceField(choices=PufCategory.choices), min_length=1, default=lambda: list(PufCategory.values)
    )
    challenge_width = serializers.IntegerField(min_value=1)
    response_width = serializers.IntegerField(min_value=1)
    puf_type = serializers.ChoiceField(choices=PufType.choices, allow_null=True, default=None)
    k = serializers.IntegerField(min_value=2)
    m = serializers.IntegerField(min_value=1)
    s = serializers.IntegerField(min_value=1)
    c = serializers.IntegerField(min_value=1)
    variation = VariationModelSerializer()
    variation_overrides = serializers.DictField(
        child=serializers.DictField(child=serializers.FloatField(min_value=0.0)), default=dict
    )
    feedback = serializers.DictField(child=serializers.IntegerField(min_value=0))
    distinct_designs = serializers.BooleanField(default=True)
    lot_seed = serializers.IntegerField(min_value=0, default=0)
    challenge_seed = serializers.IntegerField(min_value=0, default=0)
    feedback_seed = serializers.IntegerField(min_value=0, default=0)
    noise_seed = serializers.IntegerField(min_value=0, allow_null=True, default=0)
    envs = EnvConditionSerializer(many=True)

    def validate_variation_overrides(self, value):
        known = set(VariationModelSerializer().fields)
        for category, override in value.items():
            if category not in PufCategory.values:
                raise serializers.ValidationError(f"Unknown category {category!r}")
            if set(override) - known:
                raise serializers.ValidationError(f"Unknown variation fields for {category}: {sorted(set(override) - known)}")
        return value

    def validate(self, data):
        for category in data["categories"]:
            taps = data["feedback"].get(category)
            if taps is None:
                raise serializers.ValidationError(f"No feedback tap count for {category}")
            if taps > data["challenge_width"]:
                raise serializers.ValidationError(
                    f"{category}: {taps} taps do not fit {data['challenge_width']} challenge inputs"
                )
        if data["puf_type"] == PufType.WEAK and data["challenge_width"] > 16:
            raise serializers.ValidationError("Weak PUFs are evaluated exhaustively; use at most 16 challenge bits")
        if not data["envs"]:
            raise serializers.ValidationError("At least one environment condition is needed")
        return data
