# Generated by Django 5.1 on 2026-10-19 09:40

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='GridSearch',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('corpus_path', models.CharField(blank=True, max_length=500)),
                ('axes', models.JSONField(default=dict)),
                ('best_hyperparams', models.JSONField(blank=True, null=True)),
                ('best_recall', models.FloatField(blank=True, null=True)),
                ('warnings', models.JSONField(default=list)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name_plural': 'Grid searches',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('variant', models.CharField(max_length=20)),
                ('hyperparams', models.JSONField(default=dict)),
                ('seed', models.IntegerField(default=0)),
                ('corpus_path', models.CharField(blank=True, max_length=500)),
                ('checkpoint_path', models.CharField(blank=True, max_length=500)),
                ('epoch_losses', models.JSONField(default=list)),
                ('epoch_seconds', models.JSONField(default=list)),
                ('best_validation_recall', models.FloatField(blank=True, null=True)),
                ('status', models.CharField(choices=[('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], default='running', max_length=20)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='GridPoint',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('position', models.PositiveIntegerField()),
                ('values', models.JSONField(default=dict)),
                ('validation_recall', models.FloatField(blank=True, null=True)),
                ('status', models.CharField(default='completed', max_length=20)),
                ('error', models.TextField(blank=True)),
                ('search', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='points', to='training.gridsearch')),
            ],
            options={
                'ordering': ['search', 'position'],
                'unique_together': {('search', 'position')},
            },
        ),
    ]
