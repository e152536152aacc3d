import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dqd_steady.settings')
django.setup()
