from rest_framework import serializers

from pufs.models import PufCategory, PufForm
from pufs.serializers import EnvConditionSerializer, FaultSerializer, VariationModelSerializer


class GenerationSpecSerializer(serializers.Serializer):
    """
    Dataset metadata. It names every seed and knob, so replaying it regenerates
    the same rows.
    """

    instance_id = serializers.CharField(read_only=True)
    category = serializers.ChoiceField(choices=PufCategory.choices)
    form = serializers.ChoiceField(choices=PufForm.choices)
    challenge_width = serializers.IntegerField(min_value=1)
    response_width = serializers.IntegerField(min_value=1)
    lot_seed = serializers.IntegerField(min_value=0)
    instance_seed = serializers.IntegerField(min_value=0)
    design = serializers.IntegerField(min_value=0, allow_null=True, default=None)
    variation = VariationModelSerializer()
    taps = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=3, max_length=3),
        default=list,
    )
    faults = FaultSerializer(many=True, default=list)
    num_challenges = serializers.IntegerField(min_value=1)
    challenge_seed = serializers.IntegerField(min_value=0)
    cycles = serializers.IntegerField(min_value=1, default=1)
    env = EnvConditionSerializer(required=False)
    dedupe = serializers.BooleanField(default=False)
    split_seed = serializers.IntegerField(min_value=0, allow_null=True, default=None)

    def validate(self, data):
        form = PufForm(data["form"])
        if form == PufForm.ACYCLIC:
            if data["taps"] or data["faults"]:
                raise serializers.ValidationError("An acyclic dataset has no feedback taps or faults")
            if data["cycles"] != 1:
                raise serializers.ValidationError("An acyclic dataset has exactly one cycle per challenge")
        if form == PufForm.FAULTY_CYCLIC and not data["faults"]:
            raise serializers.ValidationError("A faulty_cyclic dataset needs at least one fault")
        if form == PufForm.CYCLIC and data["faults"]:
            raise serializers.ValidationError("Use form faulty_cyclic for datasets with faults")
        if data["num_challenges"] > 2 ** min(data["challenge_width"], 62):
            raise serializers.ValidationError(
                f"Cannot draw {data['num_challenges']} distinct {data['challenge_width']}-bit challenges"
            )
        return data


class DatasetSidecarSerializer(serializers.Serializer):
    columns = serializers.ListField(child=serializers.CharField())
    rows = serializers.IntegerField(min_value=0)
    crp_equivalents = serializers.IntegerField(min_value=0)
    train_rows = serializers.IntegerField(min_value=0, allow_null=True)
    test_rows = serializers.IntegerField(min_value=0, allow_null=True)
    meta = GenerationSpecSerializer()
