from rest_framework import serializers

from pufs.models import PufCategory
from pufs.serializers import ArrayField, VariationModelSerializer

from .features import FeatureMap
from .training import ModelKind, model_from_params


class HyperparametersSerializer(serializers.Serializer):
    learning_rate = serializers.FloatField(min_value=0.0)
    epochs = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)
    hidden = serializers.IntegerField(min_value=1)

    def validate_learning_rate(self, value):
        if value <= 0:
            raise serializers.ValidationError("Learning rate must be positive")
        return value


class TrainMetaSerializer(serializers.Serializer):
    epochs = serializers.IntegerField()
    learning_rate = serializers.FloatField()
    batch_size = serializers.IntegerField()
    hidden = serializers.IntegerField(allow_null=True)
    seed = serializers.IntegerField()
    train_rows = serializers.IntegerField()
    final_train_loss = serializers.FloatField()


class AttackModelSerializer(serializers.Serializer):
    feature_map = serializers.ChoiceField(choices=FeatureMap.choices)
    kind = serializers.ChoiceField(choices=ModelKind.choices)
    challenge_width = serializers.IntegerField(min_value=1)
    params = serializers.DictField(child=ArrayField(), source="learner.params")
    train_meta = TrainMetaSerializer()

    def create(self, validated_data):
        return model_from_params(
            validated_data["feature_map"],
            validated_data["kind"],
            validated_data["challenge_width"],
            validated_data["learner"]["params"],
            validated_data["train_meta"],
        )


class AttackReportSerializer(serializers.Serializer):
    train_rows = serializers.IntegerField()
    test_rows = serializers.IntegerField()
    test_accuracy_pct = serializers.FloatField()
    confusion = serializers.DictField(child=serializers.IntegerField())


class Table1RowSerializer(serializers.Serializer):
    design = serializers.CharField()
    category = serializers.CharField()
    form = serializers.CharField()
    challenge_width = serializers.IntegerField()
    taps = serializers.IntegerField()
    faults = serializers.IntegerField()
    dataset_rows = serializers.IntegerField()
    crp_equivalents = serializers.IntegerField()
    train_rows = serializers.IntegerField()
    test_rows = serializers.IntegerField()
    test_accuracy_pct = serializers.FloatField()
    clean_accuracy_pct = serializers.FloatField(allow_null=True)
    confusion = serializers.DictField(child=serializers.IntegerField())
    final_train_loss = serializers.FloatField()


class Table1ConfigSerializer(serializers.Serializer):
    """Everything one modeling-attack comparison depends on."""

    categories = serializers.ListField(
        child=serializers.ChoiceField(choices=PufCategory.choices), min_length=1, default=lambda: list(PufCategory.values)
    )
    challenge_width = serializers.IntegerField(min_value=1)
    num_challenges = serializers.IntegerField(min_value=5)
    cycles = serializers.IntegerField(min_value=1)
    feedback = serializers.DictField(child=serializers.IntegerField(min_value=0))
    faults = serializers.DictField(child=serializers.IntegerField(min_value=0))
    dedupe = serializers.BooleanField(default=False)
    feature_map = serializers.ChoiceField(choices=FeatureMap.choices)
    model = serializers.ChoiceField(choices=ModelKind.choices, default=ModelKind.LR)
    hyper = HyperparametersSerializer()
    variation = VariationModelSerializer()
    lot_seed = serializers.IntegerField(min_value=0, default=0)
    instance_seed = serializers.IntegerField(min_value=0, default=0)
    challenge_seed = serializers.IntegerField(min_value=0, default=0)
    feedback_seed = serializers.IntegerField(min_value=0, default=0)
    fault_seed = serializers.IntegerField(min_value=0, default=0)
    split_seed = serializers.IntegerField(min_value=0, default=0)
    train_seed = serializers.IntegerField(min_value=0, default=0)

    def validate(self, data):
        n_c = data["challenge_width"]
        for category in data["categories"]:
            for name in ("feedback", "faults"):
                if category not in data[name]:
                    raise serializers.ValidationError(f"No {name} count for {category}")
            taps = data["feedback"][category]
            if taps > n_c:
                raise serializers.ValidationError(f"{category}: {taps} taps do not fit {n_c} challenge inputs")
            # sites: one response bit, the tap XORs and every effective challenge bit
            if data["faults"][category] > 1 + taps + n_c:
                raise serializers.ValidationError(f"{category}: more faults than fault sites")
        if data["num_challenges"] > 2 ** min(n_c, 62):
            raise serializers.ValidationError(f"Cannot draw {data['num_challenges']} distinct {n_c}-bit challenges")
        return data
