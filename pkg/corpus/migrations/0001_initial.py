# Generated by Django 5.1 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='CorpusSnapshot',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('out_dir', models.CharField(max_length=500)),
                ('source', models.CharField(blank=True, max_length=500)),
                ('holdout_rule', models.CharField(blank=True, max_length=100)),
                ('min_item_count', models.PositiveIntegerField(default=5)),
                ('min_session_len', models.PositiveIntegerField(default=2)),
                ('items', models.PositiveIntegerField(default=0)),
                ('train_sessions', models.PositiveIntegerField(default=0)),
                ('test_sessions', models.PositiveIntegerField(default=0)),
                ('avg_length', models.FloatField(default=0.0)),
                ('aug_train', models.PositiveIntegerField(default=0)),
                ('aug_test', models.PositiveIntegerField(default=0)),
                ('aug_avg_length', models.FloatField(default=0.0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
