# Generated by Django 5.1 on 2026-10-19 09:52

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='EvaluationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('variant', models.CharField(max_length=20)),
                ('checkpoint_path', models.CharField(blank=True, max_length=500)),
                ('corpus_path', models.CharField(blank=True, max_length=500)),
                ('label', models.CharField(choices=[('honest', 'Honest'), ('analysis', 'Analysis')], default='honest', max_length=20)),
                ('examples', models.PositiveIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='MetricRow',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('k', models.PositiveIntegerField()),
                ('recall', models.FloatField()),
                ('mrr', models.FloatField()),
                ('ndcg', models.FloatField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='rows', to='evaluation.evaluationrun')),
            ],
            options={
                'ordering': ['run', 'k'],
                'unique_together': {('run', 'k')},
            },
        ),
    ]
