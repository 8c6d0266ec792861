import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "feedpuf.settings")
django.setup()
